#include "bypassqkd.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bqkd/bounds.hpp"
#include "bqkd/keyrate.hpp"
#include "bqkd/protocol.hpp"

using nlohmann::json;
using namespace bqkd;

namespace {

thread_local std::string g_error;
std::atomic<int> g_thread_override{0};

bqkd_status fail(bqkd_status st, const std::string& msg) {
  g_error = msg;
  return st;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EtaTMode { Scan, Fixed, EqualToEtaAe };
enum class WeightMode { Fixed, FromDoubleClicks };

}  // namespace

struct bqkd_config {
  ProtocolKind kind = ProtocolKind::Sp;
  SpNoiseModel sp;
  WcpModel wcp;
  double epsilon = 1e-8;
  std::vector<double> eta_ae;
  EtaTMode et_mode = EtaTMode::Fixed;
  std::vector<double> et_grid;
  double et_value = 1.0;
  WeightMode w_mode = WeightMode::Fixed;
  double w_value = 0.0;
  double q_dc = 0.0;
  int n_cut = 2;
  FwOptions fopt;
  int jobs = 0;
  unsigned seed = 0;
};

struct bqkd_results {
  std::vector<bqkd_row> rows;
  std::string csv;
};

namespace {

double get_prob(const json& j, const std::string& path, double dflt) {
  if (!j.contains(path)) return dflt;
  if (!j[path].is_number())
    throw ConfigError(path + ": expected a number");
  double v = j[path].get<double>();
  if (v < 0.0 || v > 1.0)
    throw ConfigError(path + ": probability outside [0,1]");
  return v;
}

double get_num(const json& j, const std::string& path, double dflt) {
  if (!j.contains(path)) return dflt;
  if (!j[path].is_number())
    throw ConfigError(path + ": expected a number");
  return j[path].get<double>();
}

std::vector<double> get_prob_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw ConfigError(path + ": expected a non-empty array");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(path + "[" + std::to_string(i) +
                        "]: expected a number");
    double v = j[i].get<double>();
    if (v < 0.0 || v > 1.0)
      throw ConfigError(path + "[" + std::to_string(i) +
                        "]: probability outside [0,1]");
    out.push_back(v);
  }
  return out;
}

bqkd_config parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("schema_version") || !j["schema_version"].is_number() ||
      j["schema_version"].get<int>() != 1) {
    throw ConfigError("schema_version: missing or unsupported (expected 1)");
  }
  bqkd_config cfg;

  std::string proto = j.value("protocol", std::string());
  if (proto == "sp") cfg.kind = ProtocolKind::Sp;
  else if (proto == "sp_mismatch") cfg.kind = ProtocolKind::SpMismatch;
  else if (proto == "wcp") cfg.kind = ProtocolKind::Wcp;
  else throw ConfigError("protocol: expected sp | sp_mismatch | wcp");

  if (j.contains("noise")) {
    const json& n = j["noise"];
    if (!n.is_object()) throw ConfigError("noise: expected an object");
    cfg.sp.eta_ch = get_prob(n, "eta_ch", cfg.sp.eta_ch);
    cfg.sp.eta_d = get_prob(n, "eta_d", cfg.sp.eta_d);
    cfg.sp.e_d = get_prob(n, "e_d", cfg.sp.e_d);
    cfg.sp.p_d = get_prob(n, "p_d", cfg.sp.p_d);
    cfg.sp.p_z = get_prob(n, "p_z", cfg.sp.p_z);
    cfg.sp.e_0 = get_prob(n, "e_0", cfg.sp.e_0);
    cfg.sp.q = get_prob(n, "q", cfg.sp.q);
    cfg.sp.eta_1 = get_prob(n, "eta_1", cfg.sp.eta_1);
    cfg.sp.eta_2 = get_prob(n, "eta_2", cfg.sp.eta_2);
  }
  if (j.contains("wcp")) {
    const json& wj = j["wcp"];
    if (!wj.is_object()) throw ConfigError("wcp: expected an object");
    cfg.wcp.mu = get_num(wj, "mu", cfg.wcp.mu);
    if (cfg.wcp.mu <= 0.0) throw ConfigError("wcp.mu: must be positive");
    cfg.wcp.q = get_prob(wj, "q", cfg.wcp.q);
    cfg.wcp.p_z = get_prob(wj, "p_z", cfg.wcp.p_z);
  }

  cfg.epsilon = get_num(j, "epsilon", cfg.epsilon);
  if (cfg.epsilon < 0.0 || cfg.epsilon >= 1.0)
    throw ConfigError("epsilon: expected in [0,1)");

  if (!j.contains("eta_ae")) throw ConfigError("eta_ae: missing");
  cfg.eta_ae = get_prob_list(j["eta_ae"], "eta_ae");

  if (j.contains("eta_t")) {
    const json& e = j["eta_t"];
    if (!e.is_object()) throw ConfigError("eta_t: expected an object");
    std::string mode = e.value("mode", std::string());
    if (mode == "scan") {
      cfg.et_mode = EtaTMode::Scan;
      if (!e.contains("grid")) throw ConfigError("eta_t.grid: missing");
      cfg.et_grid = get_prob_list(e["grid"], "eta_t.grid");
    } else if (mode == "fixed") {
      cfg.et_mode = EtaTMode::Fixed;
      cfg.et_value = get_prob(e, "value", 1.0);
    } else if (mode == "equal_to_eta_ae") {
      cfg.et_mode = EtaTMode::EqualToEtaAe;
    } else {
      throw ConfigError("eta_t.mode: expected scan | fixed | equal_to_eta_ae");
    }
  }

  if (j.contains("weight")) {
    const json& wj = j["weight"];
    if (!wj.is_object()) throw ConfigError("weight: expected an object");
    std::string mode = wj.value("mode", std::string("fixed"));
    if (mode == "fixed") {
      cfg.w_mode = WeightMode::Fixed;
      cfg.w_value = get_prob(wj, "value", 0.0);
    } else if (mode == "from_double_clicks") {
      cfg.w_mode = WeightMode::FromDoubleClicks;
      cfg.q_dc = get_prob(wj, "q_dc", 0.0);
      if (!wj.contains("N") || !wj["N"].is_number_integer())
        throw ConfigError("weight.N: expected an integer");
      cfg.n_cut = wj["N"].get<int>();
      if (cfg.n_cut <= 1) throw ConfigError("weight.N: must exceed 1");
    } else {
      throw ConfigError("weight.mode: expected fixed | from_double_clicks");
    }
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    if (!s.is_object()) throw ConfigError("solver: expected an object");
    cfg.fopt.delta = get_num(s, "delta", cfg.fopt.delta);
    if (cfg.fopt.delta <= 0.0) throw ConfigError("solver.delta: must be > 0");
    if (s.contains("max_iter")) {
      if (!s["max_iter"].is_number_integer() || s["max_iter"].get<int>() < 1)
        throw ConfigError("solver.max_iter: expected a positive integer");
      cfg.fopt.max_iter = s["max_iter"].get<int>();
    }
    cfg.fopt.sdp.gap_tol = get_num(s, "gap_tol", cfg.fopt.sdp.gap_tol);
    cfg.fopt.sdp.feas_tol = get_num(s, "feas_tol", cfg.fopt.sdp.feas_tol);
  }

  if (j.contains("jobs")) {
    if (!j["jobs"].is_number_integer() || j["jobs"].get<int>() < 0)
      throw ConfigError("jobs: expected a non-negative integer");
    cfg.jobs = j["jobs"].get<int>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0)
      throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = static_cast<unsigned>(j["seed"].get<long long>());
  }
  return cfg;
}

const char* protocol_name(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::Sp: return "sp";
    case ProtocolKind::SpMismatch: return "sp_mismatch";
    case ProtocolKind::Wcp: return "wcp";
  }
  return "?";
}

void set_str(char* dst, size_t cap, const std::string& s) {
  std::snprintf(dst, cap, "%s", s.c_str());
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string row_csv_header() {
  return "scenario_id,protocol,eta_ae,eta_t,w,fw_value,lower_bound,ec_term,"
         "key_rate,feasible,iterations,duality_gap,wall_time_ms,status";
}

std::string row_csv_line(const bqkd_row& r) {
  std::ostringstream os;
  os << r.scenario_id << ',' << r.protocol << ',' << num(r.eta_ae) << ','
     << num(r.eta_t) << ',' << num(r.w) << ',' << num(r.fw_value) << ','
     << num(r.lower_bound) << ',' << num(r.ec_term) << ','
     << num(r.key_rate) << ',' << r.feasible << ',' << r.iterations << ','
     << num(r.duality_gap) << ',' << num(std::round(r.wall_time_ms)) << ','
     << r.status;
  return os.str();
}

bqkd_row make_row(const std::string& id, ProtocolKind kind, double ae,
                  double et, double w, const PipelinePoint& pt) {
  bqkd_row r{};
  set_str(r.scenario_id, sizeof r.scenario_id, id);
  set_str(r.protocol, sizeof r.protocol, protocol_name(kind));
  r.eta_ae = ae;
  r.eta_t = et;
  r.w = w;
  r.wall_time_ms = pt.wall_ms;
  if (!pt.feasible) {
    set_str(r.status, sizeof r.status, "infeasible");
    return r;
  }
  r.fw_value = pt.rate.fw_value;
  r.lower_bound = pt.rate.lower_bound;
  r.ec_term = pt.rate.ec_term;
  r.key_rate = pt.rate.key_rate;
  r.feasible = 1;
  r.iterations = pt.trace.iterations;
  r.duality_gap = pt.rate.dual_gap;
  set_str(r.status, sizeof r.status,
          pt.rate.certified ? "ok" : "numerical_trouble");
  return r;
}

int effective_jobs(int requested) {
  int over = g_thread_override.load();
  int n = over > 0 ? over : requested;
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

/// Runs fn(0..n-1) on a small pool; results must be written to disjoint
/// slots so the merged order is the index order regardless of scheduling.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  int workers = std::min<size_t>(std::max(1, jobs), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

Scenario build_scenario(const bqkd_config& cfg, double ae, double et,
                        double w) {
  BypassParams bp{ae, et};
  switch (cfg.kind) {
    case ProtocolKind::Sp:
      return make_sp_scenario(cfg.sp, bp, cfg.epsilon);
    case ProtocolKind::SpMismatch:
      return make_sp_mismatch_scenario(cfg.sp, bp, cfg.epsilon);
    case ProtocolKind::Wcp:
      return make_wcp_scenario(cfg.wcp, bp, w, cfg.epsilon);
  }
  throw std::logic_error("unknown protocol");
}

double resolve_weight(const bqkd_config& cfg, double ae) {
  if (cfg.w_mode == WeightMode::Fixed) return cfg.w_value;
  double f_tail = cfg.kind == ProtocolKind::Wcp
                      ? poisson_tail(cfg.wcp.mu * (1.0 - ae), cfg.n_cut)
                      : 0.0;
  double p_z = cfg.kind == ProtocolKind::Wcp ? cfg.wcp.p_z : cfg.sp.p_z;
  return weight_bound(cfg.q_dc, cfg.n_cut, p_z, f_tail).w;
}

void finalize_csv(bqkd_results& res) {
  std::ostringstream os;
  os << row_csv_header() << '\n';
  for (const auto& r : res.rows) os << row_csv_line(r) << '\n';
  res.csv = os.str();
}

// ---- figures ----

FwOptions loose_fw(double delta, int max_iter) {
  FwOptions fo;
  fo.delta = delta;
  fo.max_iter = max_iter;
  return fo;
}

bqkd_results* figure_fig3() {
  // matched single-photon rate against eta_AE at eta_T = 1, with the
  // analytic bypass-agnostic and extended-bypass reference curves
  auto* res = new bqkd_results;
  SpNoiseModel m;
  SpStats st = sp_statistics(m);
  std::vector<double> grid{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::string> extra(grid.size());
  res->rows.resize(grid.size());
  parallel_for(grid.size(), effective_jobs(0), [&](size_t i) {
    double ae = grid[i];
    Scenario sc = make_sp_scenario(m, {ae, 1.0}, 1e-12);
    PipelinePoint pt = certified_pipeline(sc, 0.0);
    char id[32];
    std::snprintf(id, sizeof id, "fig3-%02zu", i);
    res->rows[i] = make_row(id, ProtocolKind::Sp, ae, 1.0, 0.0, pt);
    extra[i] = num(ae) + "," + num(res->rows[i].key_rate) + "," +
               num(baseline_sp_normal(m.p_z, st.q_click, st.e)) + "," +
               num(baseline_sp_bypass(m.p_z, st.q_click, st.e, ae));
  });
  std::ostringstream os;
  os << "eta_ae,key_rate,spnorm,extbp_sp\n";
  for (const auto& l : extra) os << l << '\n';
  res->csv = os.str();
  return res;
}

bqkd_results* figure_fig4() {
  // mismatched-detector heuristic at eta_AE = eta_T = 0.9 against the
  // depolarizing strength, with the tilted-state analytic rate
  auto* res = new bqkd_results;
  std::vector<double> eta1s{0.078, 0.5};
  std::vector<double> qs{0.0, 0.025, 0.05, 0.075, 0.1};
  size_t n = eta1s.size() * qs.size();
  std::vector<std::string> extra(n);
  res->rows.resize(n);
  parallel_for(n, effective_jobs(0), [&](size_t i) {
    SpNoiseModel m;
    m.eta_1 = eta1s[i / qs.size()];
    m.q = qs[i % qs.size()];
    Scenario sc = make_sp_mismatch_scenario(m, {0.9, 0.9}, 1e-12);
    PipelinePoint pt = certified_pipeline(sc, 0.0);
    char id[32];
    std::snprintf(id, sizeof id, "fig4-%02zu", i);
    res->rows[i] = make_row(id, ProtocolKind::SpMismatch, 0.9, 0.9, 0.0, pt);
    extra[i] = num(m.eta_1) + "," + num(m.q) + "," +
               num(res->rows[i].key_rate) + "," +
               num(tilted_rate(m.eta_1, m.eta_2, m.p_z));
  });
  std::ostringstream os;
  os << "eta_1,q,key_rate,tilted\n";
  for (const auto& l : extra) os << l << '\n';
  res->csv = os.str();
  return res;
}

bqkd_results* figure_fig6() {
  // weak-coherent-pulse heuristic (W = 0, eta_T = 1) against eta_AE for a
  // few intensities, with the extended-bypass analytic reference
  auto* res = new bqkd_results;
  std::vector<double> mus{0.5, 0.8, 1.1};
  std::vector<double> aes{0.8, 0.85, 0.9, 0.95, 1.0};
  size_t n = mus.size() * aes.size();
  std::vector<std::string> extra(n);
  res->rows.resize(n);
  parallel_for(n, effective_jobs(0), [&](size_t i) {
    WcpModel wm;
    wm.mu = mus[i / aes.size()];
    double ae = aes[i % aes.size()];
    WcpStats st = wcp_statistics(wm);
    Scenario sc = make_wcp_scenario(wm, {ae, 1.0}, 0.0, 1e-12);
    PipelinePoint pt = certified_pipeline(sc, 0.0, {}, loose_fw(1e-4, 80));
    char id[32];
    std::snprintf(id, sizeof id, "fig6-%02zu", i);
    res->rows[i] = make_row(id, ProtocolKind::Wcp, ae, 1.0, 0.0, pt);
    double e_mu = st.e_z;  // symmetric by construction
    extra[i] = num(wm.mu) + "," + num(ae) + "," +
               num(res->rows[i].key_rate) + "," +
               num(baseline_wcp_bypass(wm.p_z, wm.mu, st.q_mu, e_mu, ae)) +
               "," + std::to_string(res->rows[i].feasible);
  });
  std::ostringstream os;
  os << "mu,eta_ae,key_rate,extbp,feasible\n";
  for (const auto& l : extra) os << l << '\n';
  res->csv = os.str();
  return res;
}

bqkd_results* figure_fig7() {
  // collection-transmissivity-minimized weak-coherent-pulse rate (W = 1e-5)
  // and the minimizing eta_T, against eta_AE
  auto* res = new bqkd_results;
  WcpModel wm;
  std::vector<double> aes{0.8, 0.85, 0.9, 0.95, 1.0};
  std::vector<double> ets{0.75, 0.85, 0.95, 1.0};
  std::vector<std::string> extra(aes.size());
  res->rows.resize(aes.size());
  parallel_for(aes.size(), effective_jobs(0), [&](size_t i) {
    double ae = aes[i];
    auto factory = [&](double et) {
      return make_wcp_scenario(wm, {ae, et}, 1e-5, 1e-12);
    };
    ScanResult sr = scan_eta_T(factory, ets, 1e-5, {}, loose_fw(2e-4, 40));
    char id[32];
    std::snprintf(id, sizeof id, "fig7-%02zu", i);
    bqkd_row r{};
    set_str(r.scenario_id, sizeof r.scenario_id, id);
    set_str(r.protocol, sizeof r.protocol, "wcp");
    r.eta_ae = ae;
    r.eta_t = sr.argmin_eta_t;
    r.w = 1e-5;
    if (sr.any_feasible) {
      r.key_rate = sr.min_rate;
      r.feasible = 1;
      set_str(r.status, sizeof r.status, "ok");
    } else {
      set_str(r.status, sizeof r.status, "infeasible");
    }
    res->rows[i] = r;
    extra[i] = num(ae) + "," + num(r.key_rate) + "," + num(r.eta_t);
  });
  std::ostringstream os;
  os << "eta_ae,min_key_rate,argmin_eta_t\n";
  for (const auto& l : extra) os << l << '\n';
  res->csv = os.str();
  return res;
}

// ---- selftest ----

struct CheckLog {
  std::string text;
  bool all_ok = true;
  void add(const std::string& name, bool ok, const std::string& detail = "") {
    text += (ok ? "pass: " : "FAIL: ") + name;
    if (!ok && !detail.empty()) text += " (" + detail + ")";
    text += '\n';
    all_ok = all_ok && ok;
  }
};

void run_selftest(CheckLog& log) {
  // objective identity against a brute-force eavesdropping simulation
  {
    SpNoiseModel m;
    Scenario sc = make_sp_scenario(m, {1.0, 1.0}, 0.0);
    Mat u = random_blocked_attack(2, 7);
    AttackResult ar = simulate_explicit_attack(u, 2, sc);
    KeyMapBundle kb = build_key_maps(sc);
    double f = f_eps(ar.rho_abf, kb).value;
    log.add("objective identity vs explicit attack",
            std::abs(f - ar.pass_entropy) <= 1e-8,
            num(f) + " vs " + num(ar.pass_entropy));
  }
  // gradient pairing against a central finite difference
  {
    SpNoiseModel m;
    Scenario sc = make_sp_scenario(m, {0.8, 1.0});
    KeyMapBundle kb = build_key_maps(sc);
    Mat rho = 0.9 * sc.rho_init +
              0.1 / sc.rho_init.rows() *
                  Mat::Identity(sc.rho_init.rows(), sc.rho_init.cols());
    Mat d = Mat::Random(rho.rows(), rho.cols());
    d = (d + d.adjoint()).eval() / 20.0;
    d -= (d.trace() / static_cast<double>(d.rows())) *
         Mat::Identity(d.rows(), d.cols());
    double h = 1e-5;
    double fd = (f_eps(rho + h * d, kb).value -
                 f_eps(rho - h * d, kb).value) /
                (2.0 * h);
    double an = (d.transpose() * grad_f_eps(rho, kb)).trace().real();
    log.add("gradient matches finite differences",
            std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)),
            num(fd) + " vs " + num(an));
  }
  // double-click closed forms
  {
    bool ok = std::abs(lambda_min_dc(3, 0.5) - 0.25) <= 1e-12;
    WeightReport wr = weight_bound(1e-3, 2, 0.5, 0.0);
    ok = ok && std::abs(wr.w_b - 4e-3) <= 1e-12 && wr.w_f == 0.0;
    log.add("double-click eigenvalue and weight closed forms", ok);
  }
  // partial trace inside the scenario builder: unit trace, bypass-arm
  // vacuum weight equal to eta_AE
  {
    SpNoiseModel m;
    Scenario sc = make_sp_scenario(m, {0.7, 1.0});
    double tr = sc.marginal_af.trace().real();
    double vac = 0.0;
    int d_f = sc.marginal_af.rows() / 4;
    for (int a = 0; a < 4; ++a)
      vac += sc.marginal_af(a * d_f, a * d_f).real();
    log.add("honest marginal trace and vacuum weight",
            std::abs(tr - 1.0) <= 1e-10 && std::abs(vac - 0.7) <= 1e-10,
            "tr=" + num(tr) + " vac=" + num(vac));
  }
  // solver closed form and weak duality
  {
    SdpProblem p;
    p.block_dims = {2};
    p.c = {{0, 0, 0, 1.0}, {0, 1, 1, 2.0}};
    SdpConstraint con;
    con.a = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
    con.b = 1.0;
    p.constraints.push_back(con);
    SdpSolution s = solve(p);
    bool ok = s.status == SdpStatus::Optimal &&
              std::abs(s.primal_obj - 1.0) <= 1e-7 &&
              (!s.dual_certified_valid ||
               s.dual_certified <= s.primal_obj + 1e-9);
    log.add("diagonal SDP closed form with weak duality", ok,
            num(s.primal_obj));
  }
  // one certified point against the bypass-agnostic analytic rate
  {
    SpNoiseModel m;
    Scenario sc = make_sp_scenario(m, {0.6, 0.8}, 1e-12);
    PipelinePoint pt = certified_pipeline(sc, 0.0);
    SpStats st = sp_statistics(m);
    double ref = baseline_sp_normal(m.p_z, st.q_click, st.e);
    bool ok = pt.feasible && pt.rate.certified &&
              pt.rate.key_rate / ref > 0.98 &&
              pt.rate.key_rate / ref < 1.02 &&
              pt.rate.lower_bound <= pt.rate.fw_value + 1e-7;
    log.add("certified single-photon point matches the analytic rate", ok,
            "ratio=" + num(pt.feasible ? pt.rate.key_rate / ref : 0.0));
  }
}

}  // namespace

extern "C" {

const char* bqkd_version(void) { return "1.0.0"; }

const char* bqkd_last_error(void) { return g_error.c_str(); }

bqkd_status bqkd_config_parse(const char* json_text, bqkd_config** out) {
  if (!json_text || !out)
    return fail(BQKD_CONFIG_ERROR, "null argument");
  *out = nullptr;
  try {
    json j = json::parse(json_text);
    *out = new bqkd_config(parse_config(j));
    return BQKD_OK;
  } catch (const json::parse_error& e) {
    return fail(BQKD_CONFIG_ERROR, std::string("config parse: ") + e.what());
  } catch (const ConfigError& e) {
    return fail(BQKD_CONFIG_ERROR, e.what());
  }
}

bqkd_status bqkd_config_load(const char* path, bqkd_config** out) {
  if (!path || !out)
    return fail(BQKD_CONFIG_ERROR, "null argument");
  std::ifstream in(path);
  if (!in)
    return fail(BQKD_CONFIG_ERROR,
                std::string("cannot open config file: ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return bqkd_config_parse(ss.str().c_str(), out);
}

void bqkd_config_free(bqkd_config* cfg) { delete cfg; }

bqkd_status bqkd_run(const bqkd_config* cfg, bqkd_results** out) {
  if (!cfg || !out)
    return fail(BQKD_CONFIG_ERROR, "null argument");
  *out = nullptr;

  struct Point {
    double ae, et, w;
  };
  std::vector<Point> pts;
  try {
    for (double ae : cfg->eta_ae) {
      double w = resolve_weight(*cfg, ae);
      switch (cfg->et_mode) {
        case EtaTMode::Scan:
          for (double et : cfg->et_grid) pts.push_back({ae, et, w});
          break;
        case EtaTMode::Fixed:
          pts.push_back({ae, cfg->et_value, w});
          break;
        case EtaTMode::EqualToEtaAe:
          pts.push_back({ae, ae, w});
          break;
      }
    }
  } catch (const std::exception& e) {
    return fail(BQKD_CONFIG_ERROR, e.what());
  }

  auto* res = new bqkd_results;
  res->rows.resize(pts.size());
  std::atomic<bool> trouble{false};
  parallel_for(pts.size(), effective_jobs(cfg->jobs), [&](size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%03zu", protocol_name(cfg->kind), i);
    try {
      Scenario sc = build_scenario(*cfg, pts[i].ae, pts[i].et, pts[i].w);
      PipelinePoint pt = certified_pipeline(sc, pts[i].w, {}, cfg->fopt);
      res->rows[i] = make_row(id, cfg->kind, pts[i].ae, pts[i].et,
                              pts[i].w, pt);
    } catch (const std::exception& e) {
      bqkd_row r{};
      set_str(r.scenario_id, sizeof r.scenario_id, id);
      set_str(r.protocol, sizeof r.protocol, protocol_name(cfg->kind));
      r.eta_ae = pts[i].ae;
      r.eta_t = pts[i].et;
      r.w = pts[i].w;
      set_str(r.status, sizeof r.status, "numerical_trouble");
      res->rows[i] = r;
    }
    if (std::strcmp(res->rows[i].status, "numerical_trouble") == 0)
      trouble = true;
  });
  finalize_csv(*res);
  *out = res;
  if (trouble)
    return fail(BQKD_NUMERICAL_FAILURE,
                "at least one grid point reported numerical trouble");
  bool any = std::any_of(res->rows.begin(), res->rows.end(),
                         [](const bqkd_row& r) { return r.feasible; });
  if (!any)
    return fail(BQKD_INFEASIBLE, "no feasible grid point");
  return BQKD_OK;
}

bqkd_status bqkd_figure(const char* name, bqkd_results** out) {
  if (!name || !out)
    return fail(BQKD_CONFIG_ERROR, "null argument");
  *out = nullptr;
  std::string which = name;
  try {
    if (which == "fig3") *out = figure_fig3();
    else if (which == "fig4") *out = figure_fig4();
    else if (which == "fig6") *out = figure_fig6();
    else if (which == "fig7") *out = figure_fig7();
    else
      return fail(BQKD_CONFIG_ERROR,
                  "unknown figure (expected fig3 | fig4 | fig6 | fig7)");
  } catch (const std::exception& e) {
    return fail(BQKD_NUMERICAL_FAILURE, e.what());
  }
  return BQKD_OK;
}

size_t bqkd_results_size(const bqkd_results* res) {
  return res ? res->rows.size() : 0;
}

bqkd_status bqkd_results_row(const bqkd_results* res, size_t i,
                             bqkd_row* out) {
  if (!res || !out || i >= res->rows.size())
    return fail(BQKD_CONFIG_ERROR, "row index out of range");
  *out = res->rows[i];
  return BQKD_OK;
}

const char* bqkd_results_csv(const bqkd_results* res) {
  return res ? res->csv.c_str() : "";
}

void bqkd_results_free(bqkd_results* res) { delete res; }

bqkd_status bqkd_weight(double q_dc, int n, double p_z, double mu,
                        double eta_ae, bqkd_weight_report* out) {
  if (!out) return fail(BQKD_CONFIG_ERROR, "null argument");
  if (mu < 0.0 || eta_ae < 0.0 || eta_ae > 1.0)
    return fail(BQKD_CONFIG_ERROR, "mu or eta_ae out of range");
  try {
    double f_tail = mu > 0.0 ? poisson_tail(mu * (1.0 - eta_ae), n) : 0.0;
    WeightReport wr = weight_bound(q_dc, n, p_z, f_tail);
    out->lambda_min = wr.lambda;
    out->w_b = wr.w_b;
    out->w_f = wr.w_f;
    out->w = wr.w;
    return BQKD_OK;
  } catch (const std::exception& e) {
    return fail(BQKD_CONFIG_ERROR, e.what());
  }
}

bqkd_status bqkd_selftest(char* buf, size_t buflen) {
  CheckLog log;
  try {
    run_selftest(log);
  } catch (const std::exception& e) {
    log.add("selftest aborted", false, e.what());
  }
  if (buf && buflen > 0)
    std::snprintf(buf, buflen, "%s", log.text.c_str());
  if (!log.all_ok) return fail(BQKD_NUMERICAL_FAILURE, "selftest failed");
  return BQKD_OK;
}

void bqkd_set_threads(int n) { g_thread_override = n < 0 ? 0 : n; }

}  // extern "C"
