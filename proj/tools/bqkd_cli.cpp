// Batch front end over the bypassqkd C API: scenario sweeps from a JSON
// config, reference figure data, the subspace-weight tool, and a selftest.
// Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 infeasible.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bypassqkd.h"

namespace {

int exit_code(bqkd_status st) { return static_cast<int>(st); }

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

// ---- minimal SVG renderer over a figure CSV (the CSV stays the source of
// truth; this only draws it) ----

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table parse_csv(const std::string& csv) {
  Table t;
  std::istringstream in(csv);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    if (first) {
      while (std::getline(ls, cell, ',')) t.header.push_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::atof(cell.c_str()));
    if (row.size() == t.header.size()) t.rows.push_back(std::move(row));
  }
  return t;
}

std::string render_svg(const Table& t, size_t x_col) {
  const double w = 720, h = 480, ml = 70, mr = 170, mt = 20, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& r : t.rows) {
    xmin = std::min(xmin, r[x_col]);
    xmax = std::max(xmax, r[x_col]);
    for (size_t c = x_col + 1; c < r.size(); ++c) {
      ymin = std::min(ymin, r[c]);
      ymax = std::max(ymax, r[c]);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto sx = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
  };
  auto sy = [&](double y) {
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
     << "' height='" << h << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr
     << "' y2='" << h - mb << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
     << h - mb << "' stroke='black'/>\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", xmin);
  os << "<text x='" << ml << "' y='" << h - mb + 20 << "' font-size='12'>"
     << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%g", xmax);
  os << "<text x='" << w - mr - 20 << "' y='" << h - mb + 20
     << "' font-size='12'>" << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%g", ymin);
  os << "<text x='5' y='" << h - mb << "' font-size='12'>" << buf
     << "</text>\n";
  std::snprintf(buf, sizeof buf, "%g", ymax);
  os << "<text x='5' y='" << mt + 10 << "' font-size='12'>" << buf
     << "</text>\n";
  os << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 10
     << "' font-size='12'>" << t.header[x_col] << "</text>\n";

  // rows sharing the columns before x_col form one curve family
  std::map<std::vector<double>, std::vector<const std::vector<double>*>>
      groups;
  for (const auto& r : t.rows) {
    std::vector<double> key(r.begin(), r.begin() + x_col);
    groups[key].push_back(&r);
  }
  int ci = 0, legend_y = static_cast<int>(mt) + 10;
  for (const auto& [key, rows] : groups) {
    for (size_t c = x_col + 1; c < t.header.size(); ++c) {
      const char* color = colors[ci % 6];
      os << "<polyline fill='none' stroke='" << color
         << "' stroke-width='1.5' points='";
      for (const auto* r : rows)
        os << sx((*r)[x_col]) << ',' << sy((*r)[c]) << ' ';
      os << "'/>\n";
      std::string label = t.header[c];
      for (size_t k = 0; k < key.size(); ++k)
        label += " [" + t.header[k] + "=" + std::to_string(key[k]) + "]";
      os << "<rect x='" << w - mr + 10 << "' y='" << legend_y - 9
         << "' width='12' height='3' fill='" << color << "'/>\n";
      os << "<text x='" << w - mr + 28 << "' y='" << legend_y
         << "' font-size='11'>" << label << "</text>\n";
      legend_y += 16;
      ++ci;
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* tc = std::getenv("BQKD_THREADS")) {
    bqkd_set_threads(std::atoi(tc));
  }

  CLI::App app{"Certified key-rate lower bounds under bypass-channel "
               "eavesdropping"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bqkd_version());

  std::string config_path, out_path, fig_name;
  bool want_svg = false;

  auto* run = app.add_subcommand("run", "Run every grid point in a config");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("-o,--output", out_path, "CSV output path (default stdout)");

  auto* figures =
      app.add_subcommand("figures", "Reference figure data at desk scale");
  figures->add_option("name", fig_name, "fig3 | fig4 | fig6 | fig7")
      ->required();
  figures->add_flag("--svg", want_svg, "also render <name>.svg");
  figures->add_option("-o,--output", out_path,
                      "CSV output path (default stdout)");

  double q_dc = 0.0, p_z = 0.5, mu = 0.0, eta_ae = 1.0;
  int n_cut = 2;
  auto* weight =
      app.add_subcommand("weight", "Subspace-weight bound from double clicks");
  weight->add_option("--qdc", q_dc, "observed double-click rate")->required();
  weight->add_option("--N", n_cut, "photon-number cutoff (> 1)")->required();
  weight->add_option("--pz", p_z, "key-basis probability")->required();
  weight->add_option("--mu", mu,
                     "weak-coherent-pulse intensity (adds the bypass-arm "
                     "Poisson tail)");
  weight->add_option("--eta-ae", eta_ae, "bypass split toward Eve");

  auto* selftest = app.add_subcommand("selftest", "Fast invariant checks");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    bqkd_config* cfg = nullptr;
    bqkd_status st = bqkd_config_load(config_path.c_str(), &cfg);
    if (st != BQKD_OK) {
      std::fprintf(stderr, "config error: %s\n", bqkd_last_error());
      return exit_code(st);
    }
    bqkd_results* res = nullptr;
    st = bqkd_run(cfg, &res);
    bqkd_config_free(cfg);
    if (res) {
      const std::string csv = bqkd_results_csv(res);
      if (out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
      } else if (!write_text(out_path, csv)) {
        std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
        bqkd_results_free(res);
        return 1;
      }
      bqkd_results_free(res);
    }
    if (st != BQKD_OK)
      std::fprintf(stderr, "%s\n", bqkd_last_error());
    return exit_code(st);
  }

  if (*figures) {
    bqkd_results* res = nullptr;
    bqkd_status st = bqkd_figure(fig_name.c_str(), &res);
    if (st != BQKD_OK) {
      std::fprintf(stderr, "%s\n", bqkd_last_error());
      return exit_code(st);
    }
    const std::string csv = bqkd_results_csv(res);
    if (out_path.empty()) {
      std::fputs(csv.c_str(), stdout);
    } else if (!write_text(out_path, csv)) {
      std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
      bqkd_results_free(res);
      return 1;
    }
    if (want_svg) {
      Table t = parse_csv(csv);
      size_t x_col = fig_name == "fig4" || fig_name == "fig6" ? 1 : 0;
      std::string svg_path = fig_name + ".svg";
      if (!write_text(svg_path, render_svg(t, x_col))) {
        std::fprintf(stderr, "cannot write %s\n", svg_path.c_str());
        bqkd_results_free(res);
        return 1;
      }
      std::fprintf(stderr, "wrote %s\n", svg_path.c_str());
    }
    bqkd_results_free(res);
    return 0;
  }

  if (*weight) {
    bqkd_weight_report rep{};
    bqkd_status st = bqkd_weight(q_dc, n_cut, p_z, mu, eta_ae, &rep);
    if (st != BQKD_OK) {
      std::fprintf(stderr, "%s\n", bqkd_last_error());
      return exit_code(st);
    }
    std::printf("lambda_min(N+1) = %.12g\n", rep.lambda_min);
    std::printf("W_B = %.12g\n", rep.w_b);
    std::printf("W_F = %.12g\n", rep.w_f);
    std::printf("W = %.12g\n", rep.w);
    return 0;
  }

  if (*selftest) {
    char buf[4096];
    bqkd_status st = bqkd_selftest(buf, sizeof buf);
    std::fputs(buf, stdout);
    return st == BQKD_OK ? 0 : 2;
  }
  return 1;
}
