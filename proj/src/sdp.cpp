#include "bqkd/sdp.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace bqkd {

namespace {

using BlockDiag = std::vector<RMat>;

BlockDiag zeros(const std::vector<int>& dims) {
  BlockDiag z;
  z.reserve(dims.size());
  for (int d : dims) z.push_back(RMat::Zero(d, d));
  return z;
}

BlockDiag identity_scaled(const std::vector<int>& dims, double s) {
  BlockDiag z;
  z.reserve(dims.size());
  for (int d : dims) z.push_back(s * RMat::Identity(d, d));
  return z;
}

double inner(const std::vector<SparseEntry>& a, const BlockDiag& x) {
  double s = 0.0;
  for (const auto& e : a) s += e.value * x[e.block](e.col, e.row);
  return s;
}

void axpy(BlockDiag& dst, const std::vector<SparseEntry>& a, double coef) {
  for (const auto& e : a) dst[e.block](e.row, e.col) += coef * e.value;
}

double dot(const BlockDiag& a, const BlockDiag& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    s += (a[i].array() * b[i].array()).sum();
  return s;
}

double inf_norm(const BlockDiag& a) {
  double s = 0.0;
  for (const auto& m : a) {
    if (m.size() > 0) s = std::max(s, m.cwiseAbs().maxCoeff());
  }
  return s;
}

double min_eig(const BlockDiag& a) {
  double s = 1e300;
  for (const auto& m : a) {
    if (m.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<RMat> es(m, Eigen::EigenvaluesOnly);
    s = std::min(s, es.eigenvalues().minCoeff());
  }
  return s;
}

// largest alpha in (0, cap] with X + alpha*dX >= 0, given X > 0
double max_step(const BlockDiag& x, const BlockDiag& dx) {
  double alpha = 1e16;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].rows() == 0) continue;
    Eigen::LLT<RMat> llt(x[i]);
    if (llt.info() != Eigen::Success) return -1.0;
    RMat l = llt.matrixL();
    RMat w = l.triangularView<Eigen::Lower>().solve(dx[i]);
    w = l.triangularView<Eigen::Lower>().solve(w.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<RMat> es((w + w.transpose()) / 2.0,
                                           Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin < 0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

struct Augmented {
  std::vector<int> dims;  // user blocks then one 1x1 slack per inequality
  int nb_user = 0;
  std::vector<std::vector<SparseEntry>> rows;
  RVec b;
  std::vector<SparseEntry> c;
  std::vector<int> active;  // surviving constraint indices
  bool inconsistent = false;
};

Augmented augment(const SdpProblem& p) {
  Augmented ag;
  ag.dims = p.block_dims;
  ag.nb_user = static_cast<int>(p.block_dims.size());
  ag.c = p.c;
  int m = static_cast<int>(p.constraints.size());
  ag.b.resize(m);
  ag.rows.resize(m);
  for (int k = 0; k < m; ++k) {
    const auto& con = p.constraints[k];
    ag.rows[k] = con.a;
    ag.b[k] = con.b;
    if (con.kind != ConstraintKind::Eq) {
      int sb = static_cast<int>(ag.dims.size());
      ag.dims.push_back(1);
      double s = con.kind == ConstraintKind::Le ? 1.0 : -1.0;
      ag.rows[k].push_back({sb, 0, 0, s});
    }
  }
  return ag;
}

double gram(const std::vector<SparseEntry>& a,
            const std::vector<SparseEntry>& b) {
  // <A, B> assuming both symmetric; plain pairwise matching (rows are short)
  double s = 0.0;
  for (const auto& e : a)
    for (const auto& f : b) {
      if (e.block == f.block && e.row == f.row && e.col == f.col)
        s += e.value * f.value;
    }
  return s;
}

// Drop equality rows dependent on earlier ones; flag contradictions.
void prune(const SdpProblem& p, Augmented& ag) {
  int m = static_cast<int>(ag.rows.size());
  std::vector<int> eq_sel;
  RMat l = RMat::Zero(m, m);  // incremental Cholesky of the selected Gram
  int r = 0;
  for (int k = 0; k < m; ++k) {
    if (p.constraints[k].kind != ConstraintKind::Eq) {
      ag.active.push_back(k);
      continue;
    }
    double gkk = gram(ag.rows[k], ag.rows[k]);
    if (gkk < 1e-14) {
      if (std::abs(ag.b[k]) > 1e-9) {
        if (getenv("SDP_DEBUG")) fprintf(stderr, "prune: zero row %d b=%g gkk=%g\n", k, ag.b[k], gkk);
        ag.inconsistent = true;
      }
      continue;
    }
    RVec g(r);
    for (int i = 0; i < r; ++i) g[i] = gram(ag.rows[eq_sel[i]], ag.rows[k]);
    RVec w =
        r > 0
            ? RVec(l.topLeftCorner(r, r).triangularView<Eigen::Lower>().solve(
                  g))
            : RVec(0);
    double res = gkk - w.squaredNorm();
    if (res > 1e-10 * gkk) {
      l.row(r).head(r) = w.transpose();
      l(r, r) = std::sqrt(res);
      eq_sel.push_back(k);
      ag.active.push_back(k);
      ++r;
    } else {
      RVec cvec =
          r > 0 ? RVec(l.topLeftCorner(r, r)
                           .transpose()
                           .triangularView<Eigen::Upper>()
                           .solve(w))
                : RVec(0);
      double combo = 0.0, cmag = 0.0;
      for (int i = 0; i < r; ++i) {
        combo += cvec[i] * ag.b[eq_sel[i]];
        cmag += std::abs(cvec[i] * ag.b[eq_sel[i]]);
      }
      // the dependency coefficients come from a solve conditioned like
      // gkk/res, so the predicted b carries that amplification; anything
      // within the inflated tolerance is treated as redundant
      double tol = 1e-7 * (1.0 + std::abs(ag.b[k]) + cmag);
      if (std::abs(ag.b[k] - combo) > tol) {
        if (res > 1e-13 * gkk) {
          // dependence itself is uncertain; keep the row instead of
          // declaring a contradiction
          l.row(r).head(r) = w.transpose();
          l(r, r) = std::sqrt(std::max(res, 1e-13 * gkk));
          eq_sel.push_back(k);
          ag.active.push_back(k);
          ++r;
        } else {
          if (getenv("SDP_DEBUG")) fprintf(stderr, "prune: contradiction row %d b=%g combo=%g res/gkk=%g\n", k, ag.b[k], combo, res / gkk);
          ag.inconsistent = true;
        }
      }
    }
  }
}

}  // namespace

RMat embed_real(const Mat& h) {
  int n = static_cast<int>(h.rows());
  RMat e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = h.real();
  e.bottomRightCorner(n, n) = h.real();
  e.topRightCorner(n, n) = -h.imag();
  e.bottomLeftCorner(n, n) = h.imag();
  return e;
}

Mat extract_complex(const RMat& e) {
  int n = static_cast<int>(e.rows()) / 2;
  RMat re = (e.topLeftCorner(n, n) + e.bottomRightCorner(n, n)) / 2.0;
  RMat im = (e.bottomLeftCorner(n, n) - e.topRightCorner(n, n)) / 2.0;
  return re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
}

void add_dense(std::vector<SparseEntry>& dst, int block, const RMat& m,
               double drop_tol) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > drop_tol) dst.push_back({block, i, j, m(i, j)});
    }
}

double sparse_inner(const std::vector<SparseEntry>& a,
                    const std::vector<RMat>& x) {
  return inner(a, x);
}

double dual_objective(const SdpProblem& p, const RVec& y) {
  double s = 0.0;
  for (int k = 0; k < y.size(); ++k) s += y[k] * p.constraints[k].b;
  return s;
}

SdpSolution solve(const SdpProblem& p, const SdpOptions& opt) {
  SdpSolution sol;
  int m = static_cast<int>(p.constraints.size());
  sol.y = RVec::Zero(m);

  Augmented ag = augment(p);
  prune(p, ag);
  if (ag.inconsistent) {
    sol.status = SdpStatus::Infeasible;
    return sol;
  }
  int ma = static_cast<int>(ag.active.size());
  int nb = static_cast<int>(ag.dims.size());
  int ntot = 0;
  for (int d : ag.dims) ntot += d;

  RVec b(ma);
  for (int k = 0; k < ma; ++k) b[k] = ag.b[ag.active[k]];
  double bnorm = ma > 0 ? b.cwiseAbs().maxCoeff() : 0.0;
  double cnorm = 0.0;
  for (const auto& e : ag.c) cnorm = std::max(cnorm, std::abs(e.value));

  BlockDiag cmat = zeros(ag.dims);
  axpy(cmat, ag.c, 1.0);

  BlockDiag x = identity_scaled(ag.dims, std::max(10.0, bnorm));
  BlockDiag s = identity_scaled(ag.dims, std::max(10.0, cnorm));
  RVec y = RVec::Zero(ma);

  // best-primal-residual iterate; every iterate is interior (PSD), so on a
  // stalled run it still serves as a feasibility witness
  BlockDiag x_best;
  RVec y_best;
  double best_pres = std::numeric_limits<double>::infinity();
  double best_dres = 0.0;

  auto finish = [&](SdpStatus st) {
    sol.status = st;
    if (st != SdpStatus::Optimal && !x_best.empty() &&
        !(sol.primal_residual <= best_pres)) {
      x = x_best;
      y = y_best;
      sol.primal_residual = best_pres;
      sol.dual_residual = best_dres;
    }
    sol.x.assign(x.begin(), x.begin() + ag.nb_user);
    for (int k = 0; k < ma; ++k) sol.y[ag.active[k]] = y[k];
    sol.primal_obj = inner(ag.c, x);
    sol.dual_obj = dual_objective(p, sol.y);
    sol.gap = sol.primal_obj - sol.dual_obj;
    auto rep = repair_dual(p, sol.y);
    if (rep) {
      sol.dual_certified = dual_objective(p, *rep);
      sol.dual_certified_valid = true;
    }
    return sol;
  };

  double prev_mu = 1e300;
  int stall = 0;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    sol.iterations = iter;
    // residuals
    RVec rp(ma);
    for (int k = 0; k < ma; ++k)
      rp[k] = b[k] - inner(ag.rows[ag.active[k]], x);
    BlockDiag rd = cmat;
    for (int k = 0; k < ma; ++k) axpy(rd, ag.rows[ag.active[k]], -y[k]);
    for (int i = 0; i < nb; ++i) rd[i] -= s[i];

    double mu = dot(x, s) / ntot;
    double pobj = inner(ag.c, x);
    double dobj = b.dot(y);
    sol.primal_residual = (ma > 0 ? rp.cwiseAbs().maxCoeff() : 0.0) /
                          (1.0 + bnorm);
    sol.dual_residual = inf_norm(rd) / (1.0 + cnorm);
    double rel_gap = std::min(std::abs(pobj - dobj), dot(x, s)) /
                     (1.0 + std::abs(pobj) + std::abs(dobj));
    if (!std::isfinite(mu) || !std::isfinite(sol.primal_residual) ||
        !std::isfinite(sol.dual_residual)) {
      return finish(SdpStatus::NumericalTrouble);
    }
    if (sol.primal_residual < best_pres) {
      best_pres = sol.primal_residual;
      best_dres = sol.dual_residual;
      x_best = x;
      y_best = y;
    }
    if (sol.primal_residual <= opt.feas_tol &&
        sol.dual_residual <= opt.feas_tol && rel_gap <= opt.gap_tol) {
      return finish(SdpStatus::Optimal);
    }

    // improving-ray infeasibility: a dual direction with A*(y) <~ 0 and
    // b.y > 0 certifies primal emptiness
    double ynorm = ma > 0 ? y.cwiseAbs().maxCoeff() : 0.0;
    if (ynorm > 1e8) {
      BlockDiag z = zeros(ag.dims);
      for (int k = 0; k < ma; ++k)
        axpy(z, ag.rows[ag.active[k]], y[k] / ynorm);
      double lmax = -min_eig([&] {
        BlockDiag neg = z;
        for (auto& blk : neg) blk = -blk;
        return neg;
      }());
      if (lmax < 1e-7 && b.dot(y) / ynorm > 1e-7) {
        return finish(SdpStatus::Infeasible);
      }
      if (ynorm > 1e12) return finish(SdpStatus::NumericalTrouble);
    }

    // factor S, form S^{-1}
    BlockDiag sinv(nb);
    bool ok = true;
    for (int i = 0; i < nb; ++i) {
      Eigen::LLT<RMat> llt(s[i]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      sinv[i] = llt.solve(RMat::Identity(ag.dims[i], ag.dims[i]));
    }
    if (!ok) return finish(SdpStatus::NumericalTrouble);

    // Schur complement M_kl = tr[A_k X A_l S^{-1}]
    RMat schur(ma, ma);
    std::vector<BlockDiag> dense_t(ma);
    const int kDenseNnz = 48;
    for (int lc = 0; lc < ma; ++lc) {
      const auto& al = ag.rows[ag.active[lc]];
      bool dense = static_cast<int>(al.size()) > kDenseNnz;
      if (dense) {
        dense_t[lc] = zeros(ag.dims);
        BlockDiag amat = zeros(ag.dims);
        axpy(amat, al, 1.0);
        std::vector<char> touched(nb, 0);
        for (const auto& e : al) touched[e.block] = 1;
        for (int i = 0; i < nb; ++i) {
          if (touched[i]) dense_t[lc][i] = x[i] * amat[i] * sinv[i];
        }
        for (int kc = 0; kc < ma; ++kc) {
          double v = 0.0;
          for (const auto& e : ag.rows[ag.active[kc]]) {
            if (touched[e.block])
              v += e.value * dense_t[lc][e.block](e.col, e.row);
          }
          schur(kc, lc) = v;
        }
      } else {
        for (int kc = 0; kc < ma; ++kc) {
          double v = 0.0;
          for (const auto& e : ag.rows[ag.active[kc]])
            for (const auto& f : al) {
              if (e.block != f.block) continue;
              v += e.value * f.value * x[e.block](e.col, f.row) *
                   sinv[e.block](f.col, e.row);
            }
          schur(kc, lc) = v;
        }
      }
    }
    Eigen::PartialPivLU<RMat> lu(schur);

    BlockDiag e_rd(nb);
    for (int i = 0; i < nb; ++i) e_rd[i] = x[i] * rd[i] * sinv[i];
    RVec a_sinv(ma), a_x(ma), g(ma);
    for (int k = 0; k < ma; ++k) {
      const auto& ak = ag.rows[ag.active[k]];
      double si = 0.0, xi = 0.0, gi = 0.0;
      for (const auto& e : ak) {
        si += e.value * sinv[e.block](e.col, e.row);
        xi += e.value * x[e.block](e.col, e.row);
        gi += e.value * e_rd[e.block](e.col, e.row);
      }
      a_sinv[k] = si;
      a_x[k] = xi;
      g[k] = gi;
    }

    auto direction = [&](double nu, const BlockDiag* corr, RVec& dy,
                         BlockDiag& dx, BlockDiag& ds) {
      RVec rhs = rp + a_x - nu * a_sinv + g;
      if (corr) {
        for (int k = 0; k < ma; ++k) {
          double ci = 0.0;
          for (const auto& e : ag.rows[ag.active[k]])
            ci += e.value * (*corr)[e.block](e.col, e.row);
          rhs[k] += ci;
        }
      }
      dy = lu.solve(rhs);
      ds = rd;
      for (int k = 0; k < ma; ++k) axpy(ds, ag.rows[ag.active[k]], -dy[k]);
      dx = BlockDiag(nb);
      for (int i = 0; i < nb; ++i) {
        RMat t = nu * sinv[i] - x[i] - x[i] * ds[i] * sinv[i];
        if (corr) t -= (*corr)[i];
        dx[i] = (t + t.transpose()) / 2.0;
      }
    };

    // predictor
    RVec dy_a;
    BlockDiag dx_a, ds_a;
    direction(0.0, nullptr, dy_a, dx_a, ds_a);
    double ap = std::min(1.0, max_step(x, dx_a));
    double ad = std::min(1.0, max_step(s, ds_a));
    if (ap < 0 || ad < 0) return finish(SdpStatus::NumericalTrouble);
    double mu_aff = 0.0;
    {
      BlockDiag xt(nb), st(nb);
      for (int i = 0; i < nb; ++i) {
        xt[i] = x[i] + ap * dx_a[i];
        st[i] = s[i] + ad * ds_a[i];
      }
      mu_aff = dot(xt, st) / ntot;
    }
    double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3);
    sigma = std::min(1.0, std::max(sigma, 1e-10));

    // corrector with Mehrotra term dX_a dS_a S^{-1}
    BlockDiag corr(nb);
    for (int i = 0; i < nb; ++i) corr[i] = dx_a[i] * ds_a[i] * sinv[i];
    RVec dy;
    BlockDiag dx, ds;
    direction(sigma * mu, &corr, dy, dx, ds);

    const double tau = 0.98;
    double sp = max_step(x, dx);
    double sd = max_step(s, ds);
    if (sp < 0 || sd < 0) return finish(SdpStatus::NumericalTrouble);
    double alpha_p = std::min(1.0, tau * sp);
    double alpha_d = std::min(1.0, tau * sd);
    for (int i = 0; i < nb; ++i) {
      x[i] += alpha_p * dx[i];
      s[i] += alpha_d * ds[i];
    }
    y += alpha_d * dy;

    if (mu > 0.999 * prev_mu && alpha_p < 1e-3 && alpha_d < 1e-3) {
      if (++stall >= 5) return finish(SdpStatus::MaxIter);
    } else {
      stall = 0;
    }
    prev_mu = mu;
  }
  return finish(SdpStatus::MaxIter);
}

FeasibilityResult check_feasibility(const SdpProblem& p,
                                    const SdpOptions& opt) {
  // a zero-objective solve either converges (to the analytic center, a
  // well-interior witness), proves an improving ray / contradictory
  // equalities, or stalls; a phase-1 shift variable would add a second,
  // much smaller scale and wreck the Schur conditioning
  FeasibilityResult out;
  SdpProblem q = p;
  q.c.clear();
  SdpSolution sol = solve(q, opt);
  out.solver_status = sol.status;
  if (sol.status == SdpStatus::Infeasible) {
    out.feasible = false;
    return out;
  }
  // a stalled solve whose best iterate already satisfies the rows (interior
  // iterates are PSD by construction) still certifies feasibility
  if (sol.primal_residual > 1e-8) {
    return out;  // undecided; reported through solver_status
  }
  out.feasible = true;
  out.witness = sol.x;
  out.t = std::numeric_limits<double>::infinity();
  for (const auto& blk : sol.x) {
    Eigen::SelfAdjointEigenSolver<RMat> es(blk, Eigen::EigenvaluesOnly);
    out.t = std::min(out.t, es.eigenvalues().minCoeff());
  }
  return out;
}

void add_trace_norm_ball(
    SdpProblem& p, const std::vector<std::vector<SparseEntry>>& entry_maps,
    const RMat& m0, double r) {
  int d = static_cast<int>(m0.rows());
  if (static_cast<int>(entry_maps.size()) != d * (d + 1) / 2) {
    throw std::invalid_argument("trace_norm_ball: entry map count mismatch");
  }
  int pb = static_cast<int>(p.block_dims.size());
  int qb = pb + 1;
  p.block_dims.push_back(d);
  p.block_dims.push_back(d);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j, ++idx) {
      SdpConstraint c;
      c.a = entry_maps[idx];
      if (i == j) {
        c.a.push_back({pb, i, i, -1.0});
        c.a.push_back({qb, i, i, 1.0});
      } else {
        // symmetric functional picking the (i,j) off-diagonal entry
        c.a.push_back({pb, i, j, -0.5});
        c.a.push_back({pb, j, i, -0.5});
        c.a.push_back({qb, i, j, 0.5});
        c.a.push_back({qb, j, i, 0.5});
      }
      c.kind = ConstraintKind::Eq;
      c.b = m0(i, j);
      p.constraints.push_back(std::move(c));
    }
  SdpConstraint tr;
  for (int i = 0; i < d; ++i) {
    tr.a.push_back({pb, i, i, 0.5});
    tr.a.push_back({qb, i, i, 0.5});
  }
  tr.kind = ConstraintKind::Le;
  tr.b = r;
  p.constraints.push_back(std::move(tr));
}

std::optional<RVec> repair_dual(const SdpProblem& p, const RVec& y) {
  int m = static_cast<int>(p.constraints.size());
  RVec yr = y;
  for (int k = 0; k < m; ++k) {
    if (p.constraints[k].kind == ConstraintKind::Le)
      yr[k] = std::min(yr[k], 0.0);
    if (p.constraints[k].kind == ConstraintKind::Ge)
      yr[k] = std::max(yr[k], 0.0);
  }
  auto z_of = [&](const RVec& yy) {
    BlockDiag z = zeros(p.block_dims);
    axpy(z, p.c, 1.0);
    for (int k = 0; k < m; ++k) {
      if (yy[k] != 0.0) axpy(z, p.constraints[k].a, -yy[k]);
    }
    return z;
  };
  int nb = static_cast<int>(p.block_dims.size());
  auto block_min_eigs = [&](const BlockDiag& z) {
    RVec e(nb);
    for (int i = 0; i < nb; ++i) {
      if (z[i].rows() == 0) {
        e[i] = 0.0;
        continue;
      }
      Eigen::SelfAdjointEigenSolver<RMat> es(z[i], Eigen::EigenvaluesOnly);
      e[i] = es.eigenvalues().minCoeff();
    }
    return e;
  };

  // constraints that look like alpha*I on the subset of blocks they touch;
  // shifting their multiplier lifts exactly those blocks of Z
  struct IdentityLike {
    int k;
    double alpha;
    std::vector<char> touches;
  };
  std::vector<IdentityLike> candidates;
  for (int k = 0; k < m; ++k) {
    const auto& a = p.constraints[k].a;
    if (a.empty()) continue;
    double alpha = a.front().value;
    bool ident = true;
    std::vector<int> diag_count(nb, 0);
    std::vector<char> touches(nb, 0);
    for (const auto& e : a) {
      if (e.row != e.col || std::abs(e.value - alpha) > 1e-14) {
        ident = false;
        break;
      }
      touches[e.block] = 1;
      ++diag_count[e.block];
    }
    if (!ident || alpha == 0.0) continue;
    for (int i = 0; i < nb; ++i) {
      if (touches[i] && diag_count[i] != p.block_dims[i]) ident = false;
    }
    if (ident) candidates.push_back({k, alpha, touches});
  }

  for (int pass = 0; pass < 8; ++pass) {
    RVec emin = block_min_eigs(z_of(yr));
    if (emin.minCoeff() >= -1e-13) return yr;
    bool progressed = false;
    for (const auto& cand : candidates) {
      double need = 0.0;
      for (int i = 0; i < nb; ++i) {
        if (cand.touches[i]) need = std::min(need, emin[i]);
      }
      if (need >= 0.0) continue;
      double ynew = yr[cand.k] + need / cand.alpha;  // adds -need*I on T
      ConstraintKind kind = p.constraints[cand.k].kind;
      if (kind == ConstraintKind::Le && ynew > 0.0) continue;
      if (kind == ConstraintKind::Ge && ynew < 0.0) continue;
      yr[cand.k] = ynew;
      for (int i = 0; i < nb; ++i) {
        if (cand.touches[i]) emin[i] -= need;
      }
      progressed = true;
    }
    if (!progressed) break;
  }
  if (min_eig(z_of(yr)) >= -1e-13) return yr;

  // fall back to scaling toward zero; needs C itself PSD
  if (min_eig(z_of(RVec::Zero(m))) < -1e-12) return std::nullopt;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    double mid = (lo + hi) / 2.0;
    if (min_eig(z_of(RVec(mid * yr))) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return RVec(lo * yr);
}

std::string dump_problem(const SdpProblem& p) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "sdp-problem 1\n";
  os << "blocks " << p.block_dims.size();
  for (int d : p.block_dims) os << ' ' << d;
  os << "\nobjective " << p.c.size() << '\n';
  for (const auto& e : p.c)
    os << e.block << ' ' << e.row << ' ' << e.col << ' ' << num(e.value)
       << '\n';
  os << "constraints " << p.constraints.size() << '\n';
  for (const auto& con : p.constraints) {
    const char* kind = con.kind == ConstraintKind::Eq
                           ? "eq"
                           : con.kind == ConstraintKind::Le ? "le" : "ge";
    os << "constraint " << kind << ' ' << num(con.b) << ' ' << con.a.size()
       << '\n';
    for (const auto& e : con.a)
      os << e.block << ' ' << e.row << ' ' << e.col << ' ' << num(e.value)
         << '\n';
  }
  return os.str();
}

SdpProblem load_problem(const std::string& text) {
  std::istringstream is(text);
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "sdp-problem" || version != 1) {
    throw std::runtime_error("load_problem: bad header");
  }
  SdpProblem p;
  size_t nb = 0;
  is >> tag >> nb;
  if (tag != "blocks") throw std::runtime_error("load_problem: bad blocks");
  p.block_dims.resize(nb);
  for (auto& d : p.block_dims) is >> d;
  size_t nnz = 0;
  is >> tag >> nnz;
  if (tag != "objective")
    throw std::runtime_error("load_problem: bad objective");
  p.c.resize(nnz);
  for (auto& e : p.c) is >> e.block >> e.row >> e.col >> e.value;
  size_t m = 0;
  is >> tag >> m;
  if (tag != "constraints")
    throw std::runtime_error("load_problem: bad constraints");
  p.constraints.resize(m);
  for (auto& con : p.constraints) {
    std::string kind;
    is >> tag >> kind >> con.b >> nnz;
    if (tag != "constraint")
      throw std::runtime_error("load_problem: bad constraint");
    con.kind = kind == "eq" ? ConstraintKind::Eq
                            : kind == "le" ? ConstraintKind::Le
                                           : ConstraintKind::Ge;
    con.a.resize(nnz);
    for (auto& e : con.a) is >> e.block >> e.row >> e.col >> e.value;
  }
  if (!is) throw std::runtime_error("load_problem: truncated input");
  return p;
}

}  // namespace bqkd
