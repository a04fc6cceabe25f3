#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "bqkd/sdp.hpp"

using namespace bqkd;

namespace {

RMat random_sym(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  RMat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = g(rng);
  return (a + a.transpose()) / 2.0;
}

RMat random_density_real(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  RMat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = g(rng);
  RMat rho = a * a.transpose();
  return rho / rho.trace();
}

RMat random_orthogonal(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  RMat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<RMat> qr(a);
  RMat q = qr.householderQ();
  RMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) {
    if (r(i, i) < 0) q.col(i) *= -1.0;
  }
  return q;
}

double lambda_min(const RMat& m) {
  Eigen::SelfAdjointEigenSolver<RMat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// min c.x s.t. Ax = b, x >= 0, by enumerating basic solutions (oracle)
double lp_enumeration_oracle(const RMat& a, const RVec& b, const RVec& c) {
  int p = static_cast<int>(a.rows());
  int q = static_cast<int>(a.cols());
  std::vector<int> mask(q, 0);
  std::fill(mask.begin(), mask.begin() + p, 1);
  std::sort(mask.begin(), mask.end(), std::greater<int>());
  double best = 1e300;
  do {
    std::vector<int> cols;
    for (int j = 0; j < q; ++j) {
      if (mask[j]) cols.push_back(j);
    }
    RMat basis(p, p);
    for (int i = 0; i < p; ++i) basis.col(i) = a.col(cols[i]);
    Eigen::FullPivLU<RMat> lu(basis);
    if (!lu.isInvertible()) continue;
    RVec xb = lu.solve(b);
    if ((xb.array() < -1e-9).any()) continue;
    double obj = 0.0;
    for (int i = 0; i < p; ++i) obj += c[cols[i]] * xb[i];
    best = std::min(best, obj);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

RVec project_simplex(RVec v) {
  RVec u = v;
  std::sort(u.data(), u.data() + u.size(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < u.size(); ++i) {
    cum += u[i];
    double t = (cum - 1.0) / (i + 1);
    if (u[i] - t > 0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  return (v.array() - theta).max(0.0);
}

RMat project_spectrahedron(const RMat& x) {
  Eigen::SelfAdjointEigenSolver<RMat> es((x + x.transpose()) / 2.0);
  RVec lam = project_simplex(es.eigenvalues());
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// projected (sub)gradient with growing steps; exact for linear objectives
// over the projectable set {X >= 0, tr X = 1}
double projected_gradient_oracle(const RMat& c) {
  int d = static_cast<int>(c.rows());
  RMat x = RMat::Identity(d, d) / d;
  double t = 0.01;
  for (int k = 0; k < 60; ++k) {
    x = project_spectrahedron(x - t * c);
    t = std::min(2.0 * t, 1e8);  // keep the simplex projection in fp range
  }
  return (c * x).trace();
}

// 1-D concave dual for min <C,X> s.t. tr X = 1, <A,X> <= a, X >= 0:
// maximize h(u) = lambda_min(C + uA) - u a over u >= 0 (strong duality)
double dual_line_search_oracle(const RMat& c, const RMat& a, double bound) {
  auto h = [&](double u) { return lambda_min(c + u * a) - u * bound; };
  double hi = 1.0;
  while (h(2.0 * hi) > h(hi) && hi < 1e12) hi *= 2.0;
  hi *= 2.0;
  double lo = 0.0;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = h(x1), f2 = h(x2);
  while (hi - lo > 1e-11) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = h(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = h(x1);
    }
  }
  return h((lo + hi) / 2.0);
}

SdpConstraint trace_eq(int block, int d, double b) {
  SdpConstraint c;
  for (int i = 0; i < d; ++i) c.a.push_back({block, i, i, 1.0});
  c.kind = ConstraintKind::Eq;
  c.b = b;
  return c;
}

void check_weak_duality(const SdpSolution& s) {
  if (s.dual_certified_valid && s.primal_residual < 1e-8) {
    CHECK(s.dual_certified <= s.primal_obj + 1e-8);
  }
}

}  // namespace

TEST_CASE("closed forms") {
  SdpProblem p;
  p.block_dims = {2};
  p.c = {{0, 0, 0, 1.0}, {0, 1, 1, 2.0}};
  p.constraints.push_back(trace_eq(0, 2, 1.0));
  SdpSolution s = solve(p);
  REQUIRE(s.status == SdpStatus::Optimal);
  CHECK(s.primal_obj == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.x[0](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.x[0](1, 1) < 1e-6);
  check_weak_duality(s);

  // correlation-matrix extreme: max X12 + X21 with unit diagonal
  SdpProblem q;
  q.block_dims = {2};
  q.c = {{0, 0, 1, -1.0}, {0, 1, 0, -1.0}};
  q.constraints.push_back({{{0, 0, 0, 1.0}}, ConstraintKind::Eq, 1.0});
  q.constraints.push_back({{{0, 1, 1, 1.0}}, ConstraintKind::Eq, 1.0});
  SdpSolution sq = solve(q);
  REQUIRE(sq.status == SdpStatus::Optimal);
  CHECK(-sq.primal_obj == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(sq.x[0](0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  check_weak_duality(sq);
}

TEST_CASE("random LPs vs basic-solution enumeration") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    int pr = 3, qc = 6;
    RMat a(pr, qc);
    for (int i = 0; i < pr; ++i)
      for (int j = 0; j < qc; ++j) a(i, j) = g(rng);
    RVec x0(qc);
    for (int j = 0; j < qc; ++j) x0[j] = 0.5 + u(rng);
    RVec b = a * x0;
    RVec lam(pr);
    for (int i = 0; i < pr; ++i) lam[i] = g(rng);
    RVec c = a.transpose() * lam;
    for (int j = 0; j < qc; ++j) c[j] += u(rng);  // dual-feasible => bounded

    double oracle = lp_enumeration_oracle(a, b, c);

    SdpProblem p;
    p.block_dims.assign(qc, 1);
    for (int j = 0; j < qc; ++j) p.c.push_back({j, 0, 0, c[j]});
    for (int i = 0; i < pr; ++i) {
      SdpConstraint con;
      for (int j = 0; j < qc; ++j) con.a.push_back({j, 0, 0, a(i, j)});
      con.kind = ConstraintKind::Eq;
      con.b = b[i];
      p.constraints.push_back(con);
    }
    SdpSolution s = solve(p);
    REQUIRE(s.status == SdpStatus::Optimal);
    CHECK(std::abs(s.primal_obj - oracle) < 1e-7 * (1.0 + std::abs(oracle)));
    check_weak_duality(s);
  }
}

TEST_CASE("agreement with first-order oracles") {
  std::mt19937_64 rng(17);
  // projected-gradient oracle on the spectrahedron
  for (int trial = 0; trial < 20; ++trial) {
    int d = 3 + trial % 6;
    RMat c = random_sym(d, rng);
    double oracle = projected_gradient_oracle(c);

    SdpProblem p;
    p.block_dims = {d};
    add_dense(p.c, 0, c);
    p.constraints.push_back(trace_eq(0, d, 1.0));
    SdpSolution s = solve(p);
    REQUIRE(s.status == SdpStatus::Optimal);
    CHECK(std::abs(s.primal_obj - oracle) < 1e-5);
    CHECK(oracle == doctest::Approx(lambda_min(c)).epsilon(1e-9));
    check_weak_duality(s);
  }
  // inequality-constrained instances against the concave dual line search
  for (int trial = 0; trial < 10; ++trial) {
    int d = 3 + trial % 4;
    RMat c = random_sym(d, rng);
    RMat a = random_sym(d, rng);
    RMat x0 = random_density_real(d, rng);
    double bound = (a * x0).trace() + 0.2;
    double oracle = dual_line_search_oracle(c, a, bound);

    SdpProblem p;
    p.block_dims = {d};
    add_dense(p.c, 0, c);
    p.constraints.push_back(trace_eq(0, d, 1.0));
    SdpConstraint con;
    add_dense(con.a, 0, a);
    con.kind = ConstraintKind::Le;
    con.b = bound;
    p.constraints.push_back(con);
    SdpSolution s = solve(p);
    REQUIRE(s.status == SdpStatus::Optimal);
    CHECK(std::abs(s.primal_obj - oracle) < 1e-5);
    check_weak_duality(s);
  }
}

TEST_CASE("certified dual bound on early stop") {
  std::mt19937_64 rng(23);
  RMat c = random_sym(5, rng) + 5.0 * RMat::Identity(5, 5);  // keep C psd
  SdpProblem p;
  p.block_dims = {5};
  add_dense(p.c, 0, c);
  p.constraints.push_back(trace_eq(0, 5, 1.0));
  SdpSolution full = solve(p);
  REQUIRE(full.status == SdpStatus::Optimal);

  SdpOptions early;
  early.max_iter = 3;
  SdpSolution s = solve(p, early);
  CHECK(s.status == SdpStatus::MaxIter);
  REQUIRE(s.dual_certified_valid);
  CHECK(s.dual_certified <= full.primal_obj + 1e-8);
}

TEST_CASE("dual repair") {
  SdpProblem p;
  p.block_dims = {2};
  p.c = {{0, 0, 0, 1.0}, {0, 1, 1, 2.0}};
  p.constraints.push_back(trace_eq(0, 2, 1.0));
  RVec bad(1);
  bad[0] = 5.0;  // claims bound 5 > optimum 1; C - 5I not psd
  auto rep = repair_dual(p, bad);
  REQUIRE(rep.has_value());
  CHECK(dual_objective(p, *rep) == doctest::Approx(1.0).epsilon(1e-12));
  RMat z = RMat::Zero(2, 2);
  z(0, 0) = 1.0 - (*rep)[0];
  z(1, 1) = 2.0 - (*rep)[0];
  CHECK(lambda_min(z) >= -1e-12);
}

TEST_CASE("orthogonal conjugation invariance") {
  std::mt19937_64 rng(31);
  int d = 6;
  RMat c = random_sym(d, rng);
  RMat a1 = random_sym(d, rng);
  RMat a2 = random_sym(d, rng);
  RMat x0 = random_density_real(d, rng);

  auto build = [&](const RMat& q) {
    RMat cc = q * c * q.transpose();
    RMat b1 = q * a1 * q.transpose();
    RMat b2 = q * a2 * q.transpose();
    SdpProblem p;
    p.block_dims = {d};
    add_dense(p.c, 0, cc);
    p.constraints.push_back(trace_eq(0, d, 1.0));
    SdpConstraint c1;
    add_dense(c1.a, 0, b1);
    c1.kind = ConstraintKind::Eq;
    c1.b = (a1 * x0).trace();
    p.constraints.push_back(c1);
    SdpConstraint c2;
    add_dense(c2.a, 0, b2);
    c2.kind = ConstraintKind::Le;
    c2.b = (a2 * x0).trace() + 0.1;
    p.constraints.push_back(c2);
    return p;
  };

  SdpSolution base = solve(build(RMat::Identity(d, d)));
  REQUIRE(base.status == SdpStatus::Optimal);
  for (int trial = 0; trial < 3; ++trial) {
    RMat q = random_orthogonal(d, rng);
    SdpSolution rot = solve(build(q));
    REQUIRE(rot.status == SdpStatus::Optimal);
    CHECK(std::abs(rot.primal_obj - base.primal_obj) < 1e-7);
    CHECK((rot.x[0] - q * base.x[0] * q.transpose()).cwiseAbs().maxCoeff() <
          1e-6);
    check_weak_duality(rot);
  }
}

TEST_CASE("complex embedding") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1.0);
  int d = 5;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(g(rng), g(rng));
  Mat h = (a + a.adjoint()) / 2.0;
  RMat e = embed_real(h);
  CHECK((e - e.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(e.trace() == doctest::Approx(2.0 * h.trace().real()).epsilon(1e-12));

  Eigen::SelfAdjointEigenSolver<Mat> esh(h);
  Eigen::SelfAdjointEigenSolver<RMat> ese(e);
  for (int i = 0; i < d; ++i) {
    CHECK(ese.eigenvalues()[2 * i] ==
          doctest::Approx(esh.eigenvalues()[i]).epsilon(1e-10));
    CHECK(ese.eigenvalues()[2 * i + 1] ==
          doctest::Approx(esh.eigenvalues()[i]).epsilon(1e-10));
  }

  Mat back = extract_complex(e);
  CHECK((back - h).cwiseAbs().maxCoeff() < 1e-14);

  // psd equivalence on shifted copies
  Mat hp = h + (1e-3 - esh.eigenvalues().minCoeff()) * Mat::Identity(d, d);
  CHECK(lambda_min(embed_real(hp)) > 0.0);
  Mat hn = h - (1e-3 + esh.eigenvalues().maxCoeff()) * Mat::Identity(d, d);
  CHECK(lambda_min(embed_real(hn)) < 0.0);

  // solving over the embedding recovers lambda_min (traces double)
  SdpProblem p;
  p.block_dims = {2 * d};
  add_dense(p.c, 0, embed_real(h));
  p.constraints.push_back(trace_eq(0, 2 * d, 2.0));  // tr rho = 1 embedded
  SdpSolution s = solve(p);
  REQUIRE(s.status == SdpStatus::Optimal);
  CHECK(s.primal_obj / 2.0 ==
        doctest::Approx(esh.eigenvalues().minCoeff()).epsilon(1e-7));
}

TEST_CASE("trace-norm ball") {
  // scalar: (1/2)|x - 0.7| <= 0.1, so x in [0.5, 0.9], with x >= 0
  for (int sign = 0; sign < 2; ++sign) {
    SdpProblem p;
    p.block_dims = {1};
    p.c = {{0, 0, 0, sign == 0 ? 1.0 : -1.0}};
    add_trace_norm_ball(p, {{{0, 0, 0, 1.0}}}, RMat::Constant(1, 1, 0.7),
                        0.1);
    SdpSolution s = solve(p);
    REQUIRE(s.status == SdpStatus::Optimal);
    CHECK(s.x[0](0, 0) ==
          doctest::Approx(sign == 0 ? 0.5 : 0.9).epsilon(1e-6));
    check_weak_duality(s);
  }

  // r = 0 pins the image and zeroes the split blocks
  {
    SdpProblem p;
    p.block_dims = {1};
    p.c = {{0, 0, 0, -1.0}};
    add_trace_norm_ball(p, {{{0, 0, 0, 1.0}}}, RMat::Constant(1, 1, 0.7),
                        0.0);
    SdpSolution s = solve(p);
    REQUIRE(s.status == SdpStatus::Optimal);
    CHECK(s.x[0](0, 0) == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(s.x[1].trace() < 1e-6);
    CHECK(s.x[2].trace() < 1e-6);
  }

  // matrix ball: max <F, M> over (1/2)||M - M0||_1 <= r equals
  // <F, M0> + 2 r ||F||_op
  std::mt19937_64 rng(51);
  int d = 3;
  RMat m0 = random_sym(d, rng);
  RMat f = random_sym(d, rng);
  double r = 0.3;

  SdpProblem p;
  p.block_dims = {d, d};  // M = G - H with G, H >= 0
  add_dense(p.c, 0, RMat(-f));
  add_dense(p.c, 1, f);
  std::vector<std::vector<SparseEntry>> maps;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      std::vector<SparseEntry> e;
      if (i == j) {
        e.push_back({0, i, i, 1.0});
        e.push_back({1, i, i, -1.0});
      } else {
        e.push_back({0, i, j, 0.5});
        e.push_back({0, j, i, 0.5});
        e.push_back({1, i, j, -0.5});
        e.push_back({1, j, i, -0.5});
      }
      maps.push_back(e);
    }
  add_trace_norm_ball(p, maps, m0, r);
  SdpConstraint cap;  // keep the free split G, H compact
  for (int i = 0; i < d; ++i) {
    cap.a.push_back({0, i, i, 1.0});
    cap.a.push_back({1, i, i, 1.0});
  }
  cap.kind = ConstraintKind::Le;
  cap.b = m0.cwiseAbs().sum() + 2.0 * r + 5.0;
  p.constraints.push_back(cap);

  SdpSolution s = solve(p);
  REQUIRE(s.status == SdpStatus::Optimal);
  Eigen::SelfAdjointEigenSolver<RMat> ef(f, Eigen::EigenvaluesOnly);
  double opnorm = ef.eigenvalues().cwiseAbs().maxCoeff();
  double want = (f * m0).trace() + 2.0 * r * opnorm;
  CHECK(-s.primal_obj == doctest::Approx(want).epsilon(1e-6));
  check_weak_duality(s);
}

TEST_CASE("feasibility certification") {
  // max t over {tr X = 1} in dimension 2 -> t = 1/2
  SdpProblem p;
  p.block_dims = {2};
  p.constraints.push_back(trace_eq(0, 2, 1.0));
  FeasibilityResult fr = check_feasibility(p);
  CHECK(fr.feasible);
  CHECK(fr.t == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(fr.witness[0].trace() - 1.0) < 1e-6);
  CHECK(lambda_min(fr.witness[0]) > -1e-9);

  // contradictory equalities
  SdpProblem q;
  q.block_dims = {2};
  q.constraints.push_back(trace_eq(0, 2, 1.0));
  q.constraints.push_back(trace_eq(0, 2, 0.5));
  FeasibilityResult fq = check_feasibility(q);
  CHECK(!fq.feasible);
  CHECK(fq.solver_status == SdpStatus::Infeasible);

  // solve() reports the same directly
  SdpSolution sq = solve(q);
  CHECK(sq.status == SdpStatus::Infeasible);

  // infeasible through an inequality: tr X <= -1 with X >= 0
  SdpProblem w;
  w.block_dims = {2};
  SdpConstraint neg;
  neg.a = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  neg.kind = ConstraintKind::Le;
  neg.b = -1.0;
  w.constraints.push_back(neg);
  SdpSolution sw = solve(w);
  CHECK(sw.status == SdpStatus::Infeasible);
}

TEST_CASE("dump and load round trip") {
  std::mt19937_64 rng(61);
  RMat c = random_sym(3, rng);
  RMat a = random_sym(3, rng);
  SdpProblem p;
  p.block_dims = {3, 1};
  add_dense(p.c, 0, c);
  p.constraints.push_back(trace_eq(0, 3, 1.0));
  SdpConstraint con;
  add_dense(con.a, 0, a);
  con.a.push_back({1, 0, 0, 0.125});
  con.kind = ConstraintKind::Ge;
  con.b = -0.7071067811865475;
  p.constraints.push_back(con);

  std::string text = dump_problem(p);
  SdpProblem q = load_problem(text);
  REQUIRE(q.block_dims == p.block_dims);
  REQUIRE(q.c.size() == p.c.size());
  for (size_t i = 0; i < p.c.size(); ++i) {
    CHECK(q.c[i].value == p.c[i].value);  // exact round trip
  }
  REQUIRE(q.constraints.size() == p.constraints.size());
  CHECK(q.constraints[1].b == p.constraints[1].b);
  CHECK(q.constraints[1].kind == ConstraintKind::Ge);
  CHECK(dump_problem(q) == text);

  SdpSolution sp = solve(p);
  SdpSolution sq = solve(q);
  REQUIRE(sp.status == SdpStatus::Optimal);
  REQUIRE(sq.status == SdpStatus::Optimal);
  CHECK(sp.primal_obj == sq.primal_obj);
}
