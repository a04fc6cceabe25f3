#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bqkd/bounds.hpp"

using namespace bqkd;

namespace {

double factorial_d(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

double binom_d(int n, int k) {
  return factorial_d(n) / (factorial_d(k) * factorial_d(n - k));
}

// double-click operator on the N-photon two-mode block, built from scratch:
// Z-basis double clicks are diagonal; X-basis ones come through the 45-degree
// polarization rotation of the creation operators
RMat dc_block(int n, double pz) {
  int d = n + 1;  // |k photons H, n-k photons V>
  RMat z = RMat::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    if (k >= 1 && n - k >= 1) z(k, k) = 1.0;
  }
  RMat u = RMat::Zero(d, d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i <= k; ++i)
      for (int j = 0; j <= n - k; ++j) {
        int p = i + j;
        double coef = std::pow(2.0, -n / 2.0) * binom_d(k, i) *
                      binom_d(n - k, j) * ((n - k - j) % 2 ? -1.0 : 1.0);
        u(p, k) += coef * std::sqrt(factorial_d(p) * factorial_d(n - p) /
                                    (factorial_d(k) * factorial_d(n - k)));
      }
  RMat dcx = RMat::Zero(d, d);
  for (int p = 0; p < d; ++p) {
    if (p >= 1 && n - p >= 1) dcx(p, p) = 1.0;
  }
  return pz * z + (1.0 - pz) * (u.transpose() * dcx * u);
}

double residual(const SdpConstraint& con, const std::vector<RMat>& x) {
  double v = sparse_inner(con.a, x);
  switch (con.kind) {
    case ConstraintKind::Eq:
      return std::abs(v - con.b);
    case ConstraintKind::Le:
      return std::max(0.0, v - con.b);
    case ConstraintKind::Ge:
      return std::max(0.0, con.b - v);
  }
  return 0.0;
}

double max_residual(const FeasibleSetSpec& spec, const Mat& rho) {
  // only meaningful for specs without auxiliary ball blocks
  std::vector<RMat> x = to_blocks(spec, rho);
  double worst = 0.0;
  for (const auto& con : spec.problem.constraints)
    worst = std::max(worst, residual(con, x));
  return worst;
}

}  // namespace

TEST_CASE("double-click smallest eigenvalue") {
  CHECK(lambda_min_dc(1, 0.5) == 0.0);
  CHECK(lambda_min_dc(2, 0.5) == 0.0);
  CHECK(lambda_min_dc(3, 0.5) == doctest::Approx(0.25).epsilon(1e-14));
  for (double pz : {0.3, 0.5, 0.7})
    for (int n = 1; n <= 6; ++n) {
      Eigen::SelfAdjointEigenSolver<RMat> es(dc_block(n, pz),
                                             Eigen::EigenvaluesOnly);
      CHECK(std::abs(lambda_min_dc(n, pz) -
                     es.eigenvalues().minCoeff()) < 1e-12);
    }
  for (double pz : {0.3, 0.5, 0.7})
    for (int n = 1; n <= 4; ++n) {
      CHECK(lambda_min_dc(2 * n, pz) ==
            doctest::Approx(lambda_min_dc(2 * n - 1, pz)).epsilon(1e-14));
    }
  CHECK_THROWS(lambda_min_dc(0, 0.5));
  CHECK_THROWS(lambda_min_dc(3, 0.0));
}

TEST_CASE("weight bound") {
  CHECK(weight_bound(0.0, 2, 0.5, 0.0).w == 0.0);
  WeightReport rep = weight_bound(1e-3, 2, 0.5, 0.0);
  CHECK(rep.lambda == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(rep.w_b == doctest::Approx(4e-3).epsilon(1e-12));
  CHECK(rep.w == doctest::Approx(4e-3).epsilon(1e-12));
  CHECK_THROWS(weight_bound(1e-3, 1, 0.5, 0.0));
  CHECK_THROWS(weight_bound(-1e-3, 2, 0.5, 0.0));

  // combined with a bypass tail
  WeightReport rep2 = weight_bound(1e-3, 2, 0.5, 0.05);
  CHECK(rep2.w == doctest::Approx(0.054).epsilon(1e-12));

  // poisson tail: direct sum cross-check and the WCP bypass-arm parameters
  CHECK(poisson_tail(0.5, 2) ==
        doctest::Approx(1.0 - std::exp(-0.5) * (1.0 + 0.5 + 0.125))
            .epsilon(1e-14));
  CHECK(poisson_tail(0.05, 2) < 3e-5);
  CHECK(poisson_tail(0.0, 2) == 0.0);
}

TEST_CASE("weight corollary on random states") {
  // tr[rho Pi_{<=N}] >= 1 - q_dc / lambda^{N+1} on two-mode states with up
  // to 6 photons
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const int max_n = 6;
  std::vector<RMat> dc;
  for (int n = 0; n <= max_n; ++n)
    dc.push_back(n == 0 ? RMat::Zero(1, 1) : dc_block(n, 0.5));
  int dim = 0;
  for (int n = 0; n <= max_n; ++n) dim += n + 1;

  for (int trial = 0; trial < 200; ++trial) {
    RMat a(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
    RMat rho = a * a.transpose();
    rho /= rho.trace();

    double q = 0.0;
    std::vector<double> sector_weight(max_n + 1, 0.0);
    int off = 0;
    for (int n = 0; n <= max_n; ++n) {
      RMat blk = rho.block(off, off, n + 1, n + 1);
      q += (dc[n] * blk).trace();
      sector_weight[n] = blk.trace();
      off += n + 1;
    }
    for (int big_n = 2; big_n <= 4; ++big_n) {
      double outside = 0.0;
      for (int n = big_n + 1; n <= max_n; ++n) outside += sector_weight[n];
      double bound = q / lambda_min_dc(big_n + 1, 0.5);
      CHECK(outside <= bound + 1e-12);
    }
  }
}

TEST_CASE("constraint assembly") {
  // the lossless source state matches the marginal and normalization rows
  // exactly; the statistics targets come from the noisy simulation, so the
  // full W = 0 set is checked through the solver instead
  SpNoiseModel m;
  Scenario sc = make_sp_scenario(m, {0.5, 0.75});

  for (bool blocked : {true, false}) {
    AssembleOptions opt;
    opt.blocked = blocked;
    opt.include_statistics = false;
    FeasibleSetSpec spec = assemble_constraints(sc, 0.0, opt);
    CHECK(spec.marginal_rows > 0);
    CHECK(max_residual(spec, sc.rho_init) < 1e-9);
    // round trip through the face-compressed block coordinates is lossless
    Mat back = from_blocks(spec, to_blocks(spec, sc.rho_init));
    CHECK((back - sc.rho_init).cwiseAbs().maxCoeff() < 1e-10);
  }

  for (bool blocked : {true, false}) {
    AssembleOptions opt;
    opt.blocked = blocked;
    FeasibleSetSpec spec = assemble_constraints(sc, 0.0, opt);
    CHECK(spec.stat_rows == 3);
    FeasibilityResult fr = check_feasibility(spec.problem);
    REQUIRE(fr.feasible);
    CHECK(max_residual(spec, from_blocks(spec, fr.witness)) < 1e-8);
  }

  // relaxed sets stay feasible (ball rows involve auxiliary blocks, so the
  // solver does the checking)
  for (double w : {1e-4, 1.0}) {
    FeasibleSetSpec relax = assemble_constraints(sc, w);
    FeasibilityResult fr = check_feasibility(relax.problem);
    CHECK(fr.feasible);
  }
}

TEST_CASE("frank-wolfe on a toy set") {
  // only normalization constrains the state; the maximally mixed state is a
  // minimizer (it is pinching-fixed), so starting there stops immediately
  SpNoiseModel m;
  Scenario sc = make_sp_scenario(m, {1.0, 1.0});
  AssembleOptions opt;
  opt.include_statistics = false;
  opt.include_marginal = false;
  FeasibleSetSpec spec = assemble_constraints(sc, 0.0, opt);
  KeyMapBundle kb = build_key_maps(sc);
  Mat mixed = Mat::Identity(spec.dim, spec.dim) / spec.dim;
  FwTrace tr = frank_wolfe(spec, kb, mixed);
  CHECK(tr.iterations <= 2);
  CHECK(tr.stop == FwStop::Tolerance);
  CHECK(tr.final_value < 1e-8);
}

TEST_CASE("certified pipeline on the matched single-photon scenario") {
  // epsilon far below the smoothing default so the perturbation penalty
  // does not mask the comparison against the analytic reference
  SpNoiseModel m;
  Scenario sc = make_sp_scenario(m, {0.5, 0.75}, 1e-12);
  PipelinePoint pt = certified_pipeline(sc, 0.0);
  REQUIRE(pt.feasible);
  REQUIRE(pt.rate.certified);

  double baseline = baseline_sp_normal(m.p_z, 9.001998199899e-4,
                                       1.010876673476e-2);
  CHECK(pt.rate.key_rate / baseline > 0.99);
  CHECK(pt.rate.key_rate / baseline < 1.01);
  CHECK(pt.rate.lower_bound <= pt.rate.fw_value + 1e-7);
  CHECK(pt.rate.dual_gap <= 1e-5);
  // objective monotone along the iterates
  for (size_t i = 1; i < pt.trace.values.size(); ++i) {
    CHECK(pt.trace.values[i] <= pt.trace.values[i - 1] + 1e-12);
  }
}

TEST_CASE("blocked and full-space pipelines agree") {
  SpNoiseModel m;
  Scenario sc = make_sp_scenario(m, {0.5, 0.75});
  AssembleOptions full;
  full.blocked = false;
  PipelinePoint a = certified_pipeline(sc, 0.0);
  PipelinePoint b = certified_pipeline(sc, 0.0, full);
  REQUIRE(a.feasible);
  REQUIRE(b.feasible);
  CHECK(std::abs(a.rate.fw_value - b.rate.fw_value) < 1e-6);
  CHECK(std::abs(a.rate.lower_bound - b.rate.lower_bound) < 1e-6);
}

TEST_CASE("weight relaxation is monotone") {
  SpNoiseModel m;
  Scenario sc = make_sp_scenario(m, {0.5, 0.75});
  double prev = 1e300;
  for (double w : {0.0, 1e-6, 1e-5, 1e-4}) {
    PipelinePoint pt = certified_pipeline(sc, w);
    REQUIRE(pt.feasible);
    REQUIRE(pt.rate.certified);
    CHECK(pt.rate.lower_bound <= prev + 1e-7);
    CHECK(pt.rate.lower_bound <= pt.rate.fw_value + 1e-7);
    prev = pt.rate.lower_bound;
  }
}

TEST_CASE("dropping the bypass constraints never helps") {
  SpNoiseModel m;
  AssembleOptions no_marginal;
  no_marginal.include_marginal = false;
  for (double eta_ae : {0.3, 0.5, 0.8}) {
    Scenario sc = make_sp_scenario(m, {eta_ae, 0.75});
    PipelinePoint with = certified_pipeline(sc, 0.0);
    PipelinePoint without = certified_pipeline(sc, 0.0, no_marginal);
    REQUIRE(with.feasible);
    REQUIRE(without.feasible);
    CHECK(without.rate.lower_bound <= with.rate.lower_bound + 1e-7);
  }
}

TEST_CASE("collection-transmissivity scan") {
  SpNoiseModel m;
  double eta_ae = 0.6;
  auto factory = [&](double eta_t) {
    return make_sp_scenario(m, {eta_ae, eta_t}, 1e-12);
  };
  std::vector<double> grid;
  for (int i = 2; i <= 10; ++i) grid.push_back(0.1 * i);
  ScanResult scan = scan_eta_T(factory, grid, 0.0);
  REQUIRE(scan.any_feasible);

  double baseline = baseline_sp_normal(m.p_z, 9.001998199899e-4,
                                       1.010876673476e-2);
  for (size_t i = 0; i < grid.size(); ++i) {
    bool expect_feasible = grid[i] >= 1.0 - eta_ae + 0.05;
    bool expect_infeasible = grid[i] <= 1.0 - eta_ae - 0.05;
    if (expect_feasible) CHECK(scan.points[i].feasible);
    if (expect_infeasible) CHECK(!scan.points[i].feasible);
    if (scan.points[i].feasible) {
      CHECK(scan.points[i].rate.key_rate / baseline > 0.99);
      CHECK(scan.points[i].rate.key_rate / baseline < 1.01);
    }
  }
  CHECK(scan.band_lo > 1.0 - eta_ae - 0.05);
  CHECK(scan.band_lo < 1.0 - eta_ae + 0.05);
  CHECK(scan.band_hi == 1.0);
  CHECK(scan.min_rate / baseline > 0.99);

  // empty feasible set reported as a status, not an exception
  ScanResult none = scan_eta_T(factory, {0.05}, 0.0);
  CHECK(!none.any_feasible);
}

TEST_CASE("weak-coherent-pulse pipeline at zero weight") {
  WcpModel wm;
  wm.mu = 0.5;
  wm.q = 0.02;
  FwOptions fo;
  fo.delta = 1e-4;
  Scenario sc = make_wcp_scenario(wm, {1.0, 1.0}, 0.0, 1e-12);
  PipelinePoint pt = certified_pipeline(sc, 0.0, {}, fo);
  REQUIRE(pt.feasible);
  CHECK(pt.rate.lower_bound <= pt.rate.fw_value + 1e-7);
  CHECK(pt.rate.key_rate > 0.01);
  CHECK(pt.rate.key_rate < 0.2);
}
