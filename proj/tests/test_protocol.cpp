#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bqkd/protocol.hpp"

using namespace bqkd;

namespace {

Mat povm_sum(const BobPovm& p) {
  Mat s = p.n_perp;
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) s += p.n[b][y];
  return s;
}

}  // namespace

TEST_CASE("single photon source state") {
  auto basis = SubspaceBasis::enumerate(1);
  Vec psi = sp_source(0.5, basis);
  CHECK(psi.norm() == doctest::Approx(1.0));
  // |a=0,x=0> (x) |1_BH>: A index 0, BF index 1
  CHECK(psi[0 * 5 + 1].real() == doctest::Approx(0.5));

  // A marginal diagonal: p_x/2 per (a,x)
  double pz = 0.3;
  Vec psi2 = sp_source(pz, basis);
  Mat rho_a = Mat::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int s = 0; s < 5; ++s)
        rho_a(i, j) += psi2[i * 5 + s] * std::conj(psi2[j * 5 + s]);
  CHECK(rho_a(0, 0).real() == doctest::Approx(pz / 2));
  CHECK(rho_a(1, 1).real() == doctest::Approx((1 - pz) / 2));
  CHECK(rho_a(2, 2).real() == doctest::Approx(pz / 2));
  CHECK(rho_a(3, 3).real() == doctest::Approx((1 - pz) / 2));

  CHECK_THROWS(sp_source(0.0, basis));
}

TEST_CASE("single photon POVM") {
  auto basis = SubspaceBasis::enumerate(1);
  BobPovm p = sp_povm(0.5, 1.0, 1.0, basis);
  CHECK((povm_sum(p) - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  int bh = basis.index_of({1, 0, 0, 0}).value();
  CHECK(p.n[0][0](bh, bh).real() == doctest::Approx(0.5));
  CHECK(p.n[0][0].cwiseAbs().sum() == doctest::Approx(0.5));

  // mismatched efficiencies: completeness gives the no-click weight on |1_BH>
  BobPovm pm = sp_povm(0.5, 0.5, 1.0, basis);
  CHECK((povm_sum(pm) - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  // 1 - eta1 pz - eta1 (1-pz)/2 - eta2 (1-pz)/2
  CHECK(pm.n_perp(bh, bh).real() == doctest::Approx(0.375));

  // F photons never click
  int fh = basis.index_of({0, 0, 1, 0}).value();
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) CHECK(std::abs(pm.n[b][y](fh, fh)) < 1e-14);
}

TEST_CASE("single photon statistics") {
  SpNoiseModel m;
  SpStats st = sp_statistics(m);
  CHECK(st.q_click == doctest::Approx(9.001998199899e-4).epsilon(1e-10));
  CHECK(st.e == doctest::Approx(1.010876673476e-2).epsilon(1e-10));

  SpNoiseModel clean = m;
  clean.p_d = 0;
  clean.e_d = 0;
  SpStats st2 = sp_statistics(clean);
  CHECK(st2.q_click == doctest::Approx(m.eta_ch * m.eta_d));
  CHECK(st2.e == doctest::Approx(0.0));

  // the uncorrected published form keeps the dark-count factor and gives a
  // nonsensical near-50% error rate at these parameters
  CHECK(sp_statistics(m, true).e > 0.4);
}

TEST_CASE("mismatched detector statistics") {
  auto basis = SubspaceBasis::enumerate(1);
  SpNoiseModel m;
  m.q = 0.0;
  SpMismatchStats st = sp_mismatch_statistics(m, basis);
  CHECK(st.e_z == doctest::Approx(0.0));
  CHECK(st.e_x == doctest::Approx(0.0));
  CHECK(st.q_click == doctest::Approx(1.0));

  m.q = 1.0;
  st = sp_mismatch_statistics(m, basis);
  CHECK(st.e_z == doctest::Approx(0.125));

  // closed-form oracle: depolarized part contributes q pz^2 (e1+e2)/4 errors
  m.q = 0.1;
  m.eta_1 = 0.5;
  m.eta_2 = 1.0;
  st = sp_mismatch_statistics(m, basis);
  double pz = m.p_z;
  CHECK(st.e_z ==
        doctest::Approx(m.q * pz * pz * (m.eta_1 + m.eta_2) / 4.0));
  CHECK(st.e_x == doctest::Approx(m.q * (1 - pz) * (1 - pz) *
                                  (m.eta_1 + m.eta_2) / 4.0));
  // click probability: honest average vs fully mixed single photon
  double c_h = m.eta_1 * pz + (1 - pz) * (m.eta_1 + m.eta_2) / 2;
  double c_v = m.eta_2 * pz + (1 - pz) * (m.eta_1 + m.eta_2) / 2;
  double c_p = pz * (m.eta_1 + m.eta_2) / 2 + (1 - pz) * m.eta_1;
  double c_m2 = pz * (m.eta_1 + m.eta_2) / 2 + (1 - pz) * m.eta_2;
  double honest = (pz * (c_h + c_v) + (1 - pz) * (c_p + c_m2)) / 2;
  double mixed = (m.eta_1 + m.eta_2) / 2;
  CHECK(st.q_click == doctest::Approx((1 - m.q) * honest + m.q * mixed));
}

TEST_CASE("wcp source") {
  auto basis = SubspaceBasis::enumerate(2);
  WcpModel m;
  m.mu = 0.5;
  WcpSource src = wcp_source(m, 0.9, basis);
  double expect = std::exp(-0.5) * (1 + 0.5 + 0.125);
  CHECK(src.rho.trace().real() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(src.tail == doctest::Approx(1 - expect).epsilon(1e-9));
  CHECK(src.marginal_af.trace().real() == doctest::Approx(expect));

  // n=1 block at eta_AE = 1 puts nothing in F
  WcpSource full = wcp_source(m, 1.0, basis);
  for (int i = 0; i < 4; ++i) {
    for (int s = 0; s < basis.size(); ++s) {
      if (basis.at(s).f_total() == 0) continue;
      CHECK(std::abs(full.rho(i * basis.size() + s, i * basis.size() + s)) <
            1e-14);
    }
  }

  WcpModel tiny = m;
  tiny.mu = 1e-9;
  CHECK(wcp_source(tiny, 0.9, basis).rho.trace().real() ==
        doctest::Approx(1.0));
}

TEST_CASE("wcp POVM") {
  auto basis = SubspaceBasis::enumerate(2);
  double pz = 0.5;
  BobPovm p = wcp_povm(pz, basis);
  CHECK((povm_sum(p) - Mat::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-12);

  int i2h = basis.index_of({2, 0, 0, 0}).value();
  CHECK(p.n[0][0](i2h, i2h).real() == doctest::Approx(pz));
  int ihv = basis.index_of({1, 1, 0, 0}).value();
  CHECK(p.n[0][0](ihv, ihv).real() == doctest::Approx(pz / 2));
  CHECK(p.n[1][0](ihv, ihv).real() == doctest::Approx(pz / 2));

  // photon-layer block diagonality
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      Mat pinched = Mat::Zero(15, 15);
      for (int n = 0; n <= 2; ++n) {
        Mat om = Mat::Zero(15, 15);
        for (int i : basis.layer(n)) om(i, i) = 1.0;
        pinched += om * p.n[b][y] * om;
      }
      CHECK((pinched - p.n[b][y]).cwiseAbs().maxCoeff() < 1e-12);
    }

  // positivity
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      Eigen::SelfAdjointEigenSolver<Mat> es(p.n[b][y],
                                            Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("wcp statistics") {
  WcpModel m;
  m.q = 0.02;
  m.mu = 0.5;
  WcpStats st = wcp_statistics(m);
  CHECK(st.q_mu == doctest::Approx(0.405600).epsilon(1e-6));

  double total = 0;
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      total += st.p_noclick[a][x];
      for (int b = 0; b < 2; ++b)
        for (int y = 0; y < 2; ++y) total += st.p[a][b][x][y];
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  WcpModel quiet = m;
  quiet.q = 0.0;
  WcpStats st2 = wcp_statistics(quiet);
  CHECK(st2.e_z == doctest::Approx(0.0));
  CHECK(st2.e_x == doctest::Approx(0.0));
}

TEST_CASE("error correction term and baselines") {
  CHECK(ec_term(0.5, 0.1, 0.0) == doctest::Approx(0.0));
  CHECK(ec_term(0.5, 0.1, 0.5) == doctest::Approx(0.05));
  CHECK(ec_term(0.5, 9.001998199899e-4, 1.010876673476e-2) ==
        doctest::Approx(3.668914270223e-5).epsilon(1e-9));

  CHECK(baseline_sp_normal(0.5, 9.001998199899e-4, 1.010876673476e-2) ==
        doctest::Approx(3.767216245905e-4).epsilon(1e-9));

  CHECK(tilted_rate(0.078, 1.0, 0.5) ==
        doctest::Approx(0.100969709778).epsilon(1e-9));

  // both clamps active: bound collapses to minus the EC part
  double q = 0.4, e = 0.01, eta_ae = 0.5;
  REQUIRE(q < eta_ae);
  REQUIRE(q < 1 - eta_ae);
  CHECK(baseline_sp_bypass(0.5, q, e, eta_ae) ==
        doctest::Approx(-0.5 * q * binary_entropy(e)));
}

TEST_CASE("explicit attack oracle") {
  SpNoiseModel m;
  BypassParams bp{1.0, 1.0};
  Scenario sc = make_sp_scenario(m, bp);

  // identity attack: noiseless, full conditional entropy per sifted click
  Mat id3 = Mat::Identity(3, 3);
  AttackResult r = simulate_explicit_attack(id3, 1, sc);
  CHECK(r.pass_entropy == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(r.e_z == doctest::Approx(0.0));
  CHECK(r.e_x == doctest::Approx(0.0));
  CHECK(r.p_noclick == doctest::Approx(0.0));
  CHECK((r.rho_abf - sc.rho_init).cwiseAbs().maxCoeff() < 1e-12);

  // intercept-resend in Z (dephasing): no Z errors, half the X rounds err,
  // Eve learns the Z-basis key exactly
  SUBCASE("dephasing attack") {
    int de = 2;
    Mat ua = Mat::Zero(3 * de, 3 * de);
    ua(0, 0) = 1.0;
    ua(1, 1) = 1.0;  // vacuum block
    // one-photon block, (b,e) index b*de+e with b in {H=1,V=2} offset
    ua(1 * de + 0, 1 * de + 0) = 1.0;  // |H,0> -> |H,0>
    ua(1 * de + 1, 1 * de + 1) = 1.0;
    ua(2 * de + 1, 2 * de + 0) = 1.0;  // |V,0> -> |V,1>
    ua(2 * de + 0, 2 * de + 1) = 1.0;
    AttackResult ir = simulate_explicit_attack(ua, de, sc);
    CHECK(ir.e_z == doctest::Approx(0.0));
    CHECK(ir.e_x == doctest::Approx(0.25 * 0.5));  // (1-pz)^2 * 50%
    CHECK(ir.pass_entropy == doctest::Approx(0.25).epsilon(1e-10));
  }

  // random admissible attacks never disturb the Alice-side marginal
  PartialTraceB pt(sc.basis, 4);
  for (unsigned seed = 0; seed < 5; ++seed) {
    Mat ua = random_blocked_attack(3, seed);
    AttackResult rr = simulate_explicit_attack(ua, 3, sc);
    CHECK((pt.apply(rr.rho_abf) - sc.marginal_af).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK(rr.rho_abf.trace().real() == doctest::Approx(1.0));
    CHECK(rr.pass_entropy >= -1e-9);
  }

  // photon creation from vacuum is rejected
  Mat bad = Mat::Zero(3, 3);
  bad(0, 1) = 1.0;
  bad(1, 0) = 1.0;
  bad(2, 2) = 1.0;
  CHECK_THROWS(simulate_explicit_attack(bad, 1, sc));
}

TEST_CASE("scenario assembly") {
  SpNoiseModel m;
  BypassParams bp{0.8, 0.9};
  Scenario sc = make_sp_scenario(m, bp);
  CHECK(sc.observables.size() == 3);
  CHECK(sc.rho_init.trace().real() == doctest::Approx(1.0));
  // honest state need not match the fixed statistics, but the operators must
  // be Hermitian and the no-click target in range
  for (const auto& ob : sc.observables) {
    CHECK((ob.op - ob.op.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(ob.target >= 0.0);
    CHECK(ob.target <= 1.0);
  }
  Mat sum_a = Mat::Zero(4, 4);
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) sum_a += sc.alice[a][x];
  CHECK((sum_a - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);

  WcpModel wm;
  Scenario wc = make_wcp_scenario(wm, {0.85, 1.0}, 1e-5);
  CHECK(wc.observables.size() == 20);
  CHECK(wc.weight == doctest::Approx(1e-5));
  double sum_t = 0;
  for (const auto& ob : wc.observables) sum_t += ob.target;
  CHECK(sum_t == doctest::Approx(1.0).epsilon(1e-12));
}
