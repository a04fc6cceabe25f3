#include "bqkd/bounds.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace bqkd {

namespace {

Mat restrict_op(const Mat& op, const std::vector<int>& idx) {
  int n = static_cast<int>(idx.size());
  Mat sub(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sub(i, j) = op(idx[i], idx[j]);
  return sub;
}

// Hermitian functionals for the AF marginal: tr[re_unit rho] = Re N(i,j),
// tr[im_unit rho] = Im N(i,j), where N = tr_B rho.
Mat re_unit(const PartialTraceB& pt, int i, int j) {
  Mat y = Mat::Zero(pt.dim_out(), pt.dim_out());
  y(i, j) += 0.5;
  y(j, i) += 0.5;
  return pt.adjoint(y);
}

Mat im_unit(const PartialTraceB& pt, int i, int j) {
  Mat y = Mat::Zero(pt.dim_out(), pt.dim_out());
  y(i, j) = Complex(0.0, 0.5);
  y(j, i) = Complex(0.0, -0.5);
  return pt.adjoint(y);
}

// block restriction of a full-space operator, compressed onto the face
Mat compressed_op(const FeasibleSetSpec& spec, size_t g, const Mat& op) {
  return spec.frames[g].adjoint() * restrict_op(op, spec.blocks[g]) *
         spec.frames[g];
}

// Appends tr[op rho] (kind) target; drops rows whose blocked restriction
// vanishes (their target must then be zero).
void add_operator_row(FeasibleSetSpec& spec, const Mat& op,
                      ConstraintKind kind, double target) {
  SdpConstraint con;
  for (size_t g = 0; g < spec.blocks.size(); ++g) {
    Mat sub = compressed_op(spec, g, op);
    if (sub.cwiseAbs().maxCoeff() < 1e-14) continue;
    add_dense(con.a, static_cast<int>(g), embed_real(sub), 1e-14);
  }
  if (con.a.empty()) {
    if (std::abs(target) > 1e-10) {
      throw std::runtime_error(
          "constraint assembly: block restriction lost a nonzero target");
    }
    return;
  }
  con.kind = kind;
  con.b = 2.0 * target;  // embedded traces double
  spec.problem.constraints.push_back(std::move(con));
}

// sparse entries for a half-weighted embedded functional on the variable
void add_half_functional(std::vector<SparseEntry>& dst,
                         const FeasibleSetSpec& spec, const Mat& op,
                         double sign) {
  for (size_t g = 0; g < spec.blocks.size(); ++g) {
    Mat sub = compressed_op(spec, g, op);
    if (sub.cwiseAbs().maxCoeff() < 1e-14) continue;
    add_dense(dst, static_cast<int>(g), RMat(0.5 * sign * embed_real(sub)),
              1e-14);
  }
}

// Linear objective tr[op rho] over the block/face-compressed variable.
void set_objective(SdpProblem& dst, const FeasibleSetSpec& spec,
                   const Mat& op) {
  dst.c.clear();
  for (size_t g = 0; g < spec.blocks.size(); ++g) {
    add_dense(dst.c, static_cast<int>(g),
              embed_real(compressed_op(spec, g, op)), 1e-14);
  }
}

}  // namespace

std::vector<RMat> to_blocks(const FeasibleSetSpec& spec, const Mat& rho) {
  std::vector<RMat> x;
  x.reserve(spec.blocks.size());
  for (size_t g = 0; g < spec.blocks.size(); ++g)
    x.push_back(embed_real(compressed_op(spec, g, rho)));
  return x;
}

Mat from_blocks(const FeasibleSetSpec& spec, const std::vector<RMat>& x) {
  Mat rho = Mat::Zero(spec.dim, spec.dim);
  for (size_t g = 0; g < spec.blocks.size(); ++g) {
    Mat sub = spec.frames[g] * extract_complex(x[g]) *
              spec.frames[g].adjoint();
    const auto& idx = spec.blocks[g];
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < idx.size(); ++j) rho(idx[i], idx[j]) = sub(i, j);
  }
  return rho;
}

Mat sanitize_psd(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  RVec vals = es.eigenvalues().cwiseMax(0.0);
  Mat out = es.eigenvectors() * vals.cast<Complex>().asDiagonal() *
            es.eigenvectors().adjoint();
  double tr = out.trace().real();
  if (tr > 1.0) out *= 1.0 / tr;
  return out;
}

FeasibleSetSpec assemble_constraints(const Scenario& sc, double w,
                                     const AssembleOptions& opt) {
  if (w < 0.0 || w > 1.0) throw std::invalid_argument("weight outside [0,1]");
  FeasibleSetSpec spec;
  int m = sc.basis.size();
  spec.dim = 4 * m;
  spec.w = w;

  if (opt.blocked) {
    for (int n = 0; n <= sc.basis.max_total(); ++n) {
      std::vector<int> idx;
      for (int a = 0; a < 4; ++a)
        for (int s : sc.basis.layer(n)) idx.push_back(a * m + s);
      spec.blocks.push_back(std::move(idx));
    }
  } else {
    std::vector<int> idx(spec.dim);
    std::iota(idx.begin(), idx.end(), 0);
    spec.blocks.push_back(std::move(idx));
  }
  for (size_t g = 0; g < spec.blocks.size(); ++g) {
    int sz = static_cast<int>(spec.blocks[g].size());
    spec.frames.push_back(Mat::Identity(sz, sz));
  }

  // Facial reduction for the exact marginal equalities. The honest AF
  // marginal m0 is a pure-state partial trace, hence low rank; tr_B rho = m0
  // with rho >= 0 then forces rho to annihilate every kernel direction of m0
  // tensored with any B occupation. Without compressing onto that face the
  // feasible set has empty interior and interior-point solves stall.
  PartialTraceB pt(sc.basis, 4);
  if (w == 0.0 && (opt.include_marginal || opt.include_statistics)) {
    std::vector<Vec> forced;
    if (opt.include_marginal) {
      int d_f = pt.dim_f();
      Eigen::SelfAdjointEigenSolver<Mat> es(sc.marginal_af);
      std::vector<std::pair<int, int>> b_occs;
      for (const auto& st : sc.basis.states()) {
        std::pair<int, int> bo{st.n_bh, st.n_bv};
        bool seen = false;
        for (const auto& o : b_occs) seen = seen || o == bo;
        if (!seen) b_occs.push_back(bo);
      }
      for (int k = 0; k < es.eigenvalues().size(); ++k) {
        if (es.eigenvalues()[k] > 1e-12) continue;
        Vec v = es.eigenvectors().col(k);
        for (const auto& [nbh, nbv] : b_occs) {
          Vec wv = Vec::Zero(spec.dim);
          for (int a = 0; a < 4; ++a)
            for (int fi = 0; fi < d_f; ++fi) {
              const auto& f = pt.f_basis()[fi];
              auto s = sc.basis.index_of({nbh, nbv, f.n_fh, f.n_fv});
              if (s) wv[a * m + *s] = v[a * d_f + fi];
            }
          if (wv.norm() > 1e-12) forced.push_back(std::move(wv));
        }
      }
    }
    if (opt.include_statistics) {
      // a PSD observable pinned to zero forces rho off its range too
      for (const auto& obs : sc.observables) {
        if (std::abs(obs.target) > 1e-12) continue;
        Eigen::SelfAdjointEigenSolver<Mat> eo(obs.op);
        if (eo.eigenvalues().minCoeff() < -1e-12) continue;
        for (int k = 0; k < eo.eigenvalues().size(); ++k) {
          if (eo.eigenvalues()[k] > 1e-12)
            forced.push_back(eo.eigenvectors().col(k));
        }
      }
    }
    for (size_t g = 0; g < spec.blocks.size(); ++g) {
      const auto& idx = spec.blocks[g];
      int n = static_cast<int>(idx.size());
      Mat gram = Mat::Zero(n, n);
      for (const auto& wv : forced) {
        Vec sub(n);
        for (int i = 0; i < n; ++i) sub[i] = wv[idx[i]];
        gram += sub * sub.adjoint();
      }
      Eigen::SelfAdjointEigenSolver<Mat> eg(gram);
      double cut = 1e-12 * std::max(1.0, eg.eigenvalues().maxCoeff());
      int rank = 0;
      while (rank < n && eg.eigenvalues()[rank] <= cut) ++rank;
      spec.frames[g] = eg.eigenvectors().leftCols(rank);
    }
    // drop blocks whose face is trivial
    for (size_t g = spec.blocks.size(); g-- > 0;) {
      if (spec.frames[g].cols() == 0) {
        spec.blocks.erase(spec.blocks.begin() + g);
        spec.frames.erase(spec.frames.begin() + g);
      }
    }
  }
  for (const auto& fr : spec.frames)
    spec.problem.block_dims.push_back(2 * static_cast<int>(fr.cols()));

  // statistics
  if (opt.include_statistics) {
    for (const auto& obs : sc.observables) {
      if (w == 0.0) {
        add_operator_row(spec, obs.op, ConstraintKind::Eq, obs.target);
      } else {
        add_operator_row(spec, obs.op, ConstraintKind::Ge, obs.target - w);
        add_operator_row(spec, obs.op, ConstraintKind::Le, obs.target);
      }
      ++spec.stat_rows;
    }
  }

  // normalization
  Mat eye = Mat::Identity(spec.dim, spec.dim);
  if (w == 0.0) {
    add_operator_row(spec, eye, ConstraintKind::Eq, 1.0);
  } else {
    add_operator_row(spec, eye, ConstraintKind::Ge, 1.0 - w);
    add_operator_row(spec, eye, ConstraintKind::Le, 1.0);
  }

  if (!opt.include_marginal) return spec;

  // source-replacement marginal on A (x) F. The statistics rows sum to the
  // trace (POVM completeness), which the normalization pins near one; a
  // subnormalized honest marginal (truncated photon-number tail) must be
  // renormalized or the constraints contradict each other.
  int d_af = pt.dim_out();
  int d_f = pt.dim_f();
  Mat m0 = sc.marginal_af / sc.marginal_af.trace().real();

  // AF sectors by bypass-arm photon total; lossless under the block
  // restriction (the honest marginal has no cross-sector coherence)
  std::vector<std::vector<int>> sectors;
  if (opt.blocked) {
    int max_f = 0;
    for (const auto& f : pt.f_basis())
      max_f = std::max(max_f, f.n_fh + f.n_fv);
    sectors.resize(max_f + 1);
    for (int a = 0; a < 4; ++a)
      for (int fi = 0; fi < d_f; ++fi) {
        const auto& f = pt.f_basis()[fi];
        sectors[f.n_fh + f.n_fv].push_back(a * d_f + fi);
      }
    // cross-sector entries of the target must vanish for this to be exact
    std::vector<int> sector_of(d_af);
    for (size_t g = 0; g < sectors.size(); ++g)
      for (int u : sectors[g]) sector_of[u] = static_cast<int>(g);
    for (int u = 0; u < d_af; ++u)
      for (int v = 0; v < d_af; ++v) {
        if (sector_of[u] != sector_of[v] && std::abs(m0(u, v)) > 1e-10) {
          throw std::runtime_error(
              "constraint assembly: marginal has cross-layer coherence");
        }
      }
  } else {
    sectors.emplace_back(d_af);
    std::iota(sectors.back().begin(), sectors.back().end(), 0);
  }

  if (w == 0.0) {
    for (const auto& sec : sectors)
      for (size_t ui = 0; ui < sec.size(); ++ui)
        for (size_t vi = ui; vi < sec.size(); ++vi) {
          int u = sec[ui], v = sec[vi];
          add_operator_row(spec, re_unit(pt, u, v), ConstraintKind::Eq,
                           m0(u, v).real());
          ++spec.marginal_rows;
          if (u != v) {
            add_operator_row(spec, im_unit(pt, u, v), ConstraintKind::Eq,
                             m0(u, v).imag());
            ++spec.marginal_rows;
          }
        }
    return spec;
  }

  // trace-norm ball of radius sqrt(W) in the half-trace-norm: per sector,
  // PSD blocks P, Q with embed(tr_B rho - m0) = P - Q, and a shared trace
  // row (embedding doubles the trace norm, hence the 2 sqrt(W) budget)
  SdpConstraint trace_row;
  for (const auto& sec : sectors) {
    int d = static_cast<int>(sec.size());
    int big = 2 * d;
    int pb = static_cast<int>(spec.problem.block_dims.size());
    int qb = pb + 1;
    spec.problem.block_dims.push_back(big);
    spec.problem.block_dims.push_back(big);
    Mat m0_sec = restrict_op(m0, sec);
    RMat m0_emb = embed_real(m0_sec);
    for (int p = 0; p < big; ++p)
      for (int q = p; q < big; ++q) {
        SdpConstraint con;
        // functional giving the embedded-marginal entry (p, q)
        if (p < d && q < d) {
          add_half_functional(con.a, spec, re_unit(pt, sec[p], sec[q]), 1.0);
        } else if (p < d) {
          add_half_functional(con.a, spec, im_unit(pt, sec[p], sec[q - d]),
                              -1.0);
        } else {
          add_half_functional(con.a, spec,
                              re_unit(pt, sec[p - d], sec[q - d]), 1.0);
        }
        double pw = p == q ? 1.0 : 0.5;
        con.a.push_back({pb, p, q, -pw});
        con.a.push_back({qb, p, q, pw});
        if (p != q) {
          con.a.push_back({pb, q, p, -pw});
          con.a.push_back({qb, q, p, pw});
        }
        con.kind = ConstraintKind::Eq;
        con.b = m0_emb(p, q);
        spec.problem.constraints.push_back(std::move(con));
        ++spec.marginal_rows;
      }
    for (int i = 0; i < big; ++i) {
      trace_row.a.push_back({pb, i, i, 0.5});
      trace_row.a.push_back({qb, i, i, 0.5});
    }
  }
  trace_row.kind = ConstraintKind::Le;
  trace_row.b = 2.0 * std::sqrt(w);
  spec.problem.constraints.push_back(std::move(trace_row));
  return spec;
}

FwTrace frank_wolfe(const FeasibleSetSpec& spec, const KeyMapBundle& kb,
                    const Mat& rho0, const FwOptions& opt) {
  FwTrace trace;
  Mat rho = sanitize_psd(rho0);
  double fcur = f_eps(rho, kb).value;
  int stall = 0;

  SdpProblem dir = spec.problem;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    trace.iterations = iter + 1;
    trace.values.push_back(fcur);

    Mat ghat = grad_f_eps(rho, kb).transpose();  // Hermitian gradient
    set_objective(dir, spec, ghat);
    SdpSolution s = solve(dir, opt.sdp);
    if (s.status == SdpStatus::Infeasible) {
      throw std::runtime_error(
          "frank_wolfe: direction SDP infeasible at a feasible iterate");
    }
    // an approximate direction is fine: the final certified bound is sound
    // at any PSD iterate, so a stalled subproblem only costs tightness
    if (!std::isfinite(s.primal_residual) || s.primal_residual > 1e-5) {
      trace.stop = FwStop::SolverTrouble;
      break;
    }
    Mat sigma = sanitize_psd(from_blocks(spec, s.x));
    Mat delta = sigma - rho;
    double lin = (delta * ghat).trace().real();  // tr[Delta^T grad]
    trace.linear_improvements.push_back(lin);
    if (std::abs(lin) < opt.delta) {
      trace.stop = FwStop::Tolerance;
      break;
    }

    // golden-section line search on the convex restriction
    auto phi = [&](double l) { return f_eps(rho + l * delta, kb).value; };
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 1.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = phi(x1), f2 = phi(x2);
    while (hi - lo > opt.line_tol) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = phi(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = phi(x2);
      }
    }
    double lam = (lo + hi) / 2.0;
    double fnew = phi(lam);
    trace.step_sizes.push_back(lam);

    if (fnew < fcur) {
      rho += lam * delta;
      fcur = fnew;
    }
    if (trace.values.back() - fcur < 1e-12) {
      if (++stall >= 5) {
        trace.stop = FwStop::Stalled;
        break;
      }
    } else {
      stall = 0;
    }
  }
  trace.rho_star = rho;
  trace.final_value = fcur;
  return trace;
}

CertifiedRate certified_lower_bound(const Mat& rho_star,
                                    const FeasibleSetSpec& spec,
                                    const KeyMapBundle& kb, double ec) {
  CertifiedRate out;
  out.ec_term = ec;
  Mat ghat = grad_f_eps(rho_star, kb).transpose();
  out.fw_value = f_eps(rho_star, kb).value;

  SdpProblem dir = spec.problem;
  set_objective(dir, spec, ghat);
  SdpSolution s = solve(dir);
  if (!s.dual_certified_valid) {
    out.certified = false;
    out.lower_bound = -std::numeric_limits<double>::infinity();
    out.key_rate = out.lower_bound;
    out.dual_gap = std::numeric_limits<double>::infinity();
    return out;
  }
  out.beta = s.dual_certified / 2.0;  // embedded objective doubles
  double pairing = (rho_star * ghat).trace().real();
  double zeta =
      kb.epsilon > 0.0 ? zeta_eps(kb.epsilon, kb.dim_prime) : 0.0;
  out.lower_bound = out.fw_value - pairing + out.beta - 2.0 * zeta;
  out.key_rate = out.lower_bound - ec;
  out.dual_gap = out.fw_value - out.lower_bound;
  out.certified = true;
  return out;
}

double lambda_min_dc(int n, double p_z) {
  if (n < 1 || p_z <= 0.0 || p_z >= 1.0) {
    throw std::invalid_argument("lambda_min_dc: domain violation");
  }
  double c = n % 2 == 1 ? 8.0 : 16.0;
  double disc = (2.0 * p_z - 1.0) * (2.0 * p_z - 1.0) +
                c * std::pow(2.0, -n) * p_z * (1.0 - p_z);
  return 0.5 - 0.5 * std::sqrt(disc);
}

WeightReport weight_bound(double q_dc, int n, double p_z, double f_tail) {
  if (n <= 1) {
    throw std::invalid_argument(
        "weight_bound: N must exceed 1 (the double-click block is singular)");
  }
  if (q_dc < 0.0 || f_tail < 0.0) {
    throw std::invalid_argument("weight_bound: negative inputs");
  }
  WeightReport rep;
  rep.lambda = lambda_min_dc(n + 1, p_z);
  rep.w_b = q_dc / rep.lambda;
  rep.w_f = f_tail;
  rep.w = std::min(1.0, rep.w_b + rep.w_f);
  return rep;
}

double poisson_tail(double mu, int n) {
  double term = std::exp(-mu), cum = term;
  for (int k = 1; k <= n; ++k) {
    term *= mu / k;
    cum += term;
  }
  return std::max(0.0, 1.0 - cum);
}

PipelinePoint certified_pipeline(const Scenario& sc, double w,
                                 const AssembleOptions& aopt,
                                 const FwOptions& fopt) {
  auto t0 = std::chrono::steady_clock::now();
  PipelinePoint out;
  FeasibleSetSpec spec = assemble_constraints(sc, w, aopt);
  FeasibilityResult fr = check_feasibility(spec.problem, fopt.sdp);
  out.feasible = fr.feasible;
  if (out.feasible) {
    Mat rho0 = sanitize_psd(from_blocks(spec, fr.witness));
    KeyMapBundle kb = build_key_maps(sc);
    out.trace = frank_wolfe(spec, kb, rho0, fopt);
    out.rate = certified_lower_bound(out.trace.rho_star, spec, kb,
                                     sc.ec_bits);
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

ScanResult scan_eta_T(const std::function<Scenario(double)>& factory,
                      const std::vector<double>& grid, double w,
                      const AssembleOptions& aopt, const FwOptions& fopt) {
  if (grid.empty()) throw std::invalid_argument("scan_eta_T: empty grid");
  ScanResult out;
  out.grid = grid;
  out.min_rate = std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    PipelinePoint pt = certified_pipeline(factory(eta), w, aopt, fopt);
    if (pt.feasible && pt.rate.certified &&
        pt.rate.key_rate < out.min_rate) {
      out.min_rate = pt.rate.key_rate;
      out.argmin_eta_t = eta;
      out.any_feasible = true;
    }
    out.points.push_back(std::move(pt));
  }
  if (!out.any_feasible) return out;

  auto feasible_at = [&](double eta) {
    FeasibleSetSpec spec = assemble_constraints(factory(eta), w, aopt);
    FeasibilityResult fr = check_feasibility(spec.problem, fopt.sdp);
    return fr.feasible;
  };
  auto bisect = [&](double bad, double good) {
    while (std::abs(good - bad) > 1e-3) {
      double mid = (bad + good) / 2.0;
      (feasible_at(mid) ? good : bad) = mid;
    }
    return good;
  };
  int first = -1, last = -1;
  for (size_t i = 0; i < out.points.size(); ++i) {
    if (out.points[i].feasible) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  out.band_lo = first > 0 ? bisect(grid[first - 1], grid[first])
                          : grid.front();
  out.band_hi = last + 1 < static_cast<int>(grid.size())
                    ? bisect(grid[last + 1], grid[last])
                    : grid.back();
  return out;
}

}  // namespace bqkd
