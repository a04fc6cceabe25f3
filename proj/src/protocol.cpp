#include "bqkd/protocol.hpp"

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

namespace bqkd {

namespace {

Mat kron(const Mat& a, const Mat& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

// unnormalized von Neumann entropy in bits, -tr[rho log2 rho]
double entropy_bits(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0,
                                        Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double l = es.eigenvalues()[i];
    if (l > 1e-15) s -= l * std::log2(l);
  }
  return s;
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es((m + m.adjoint()) / 2.0);
  RVec vals = es.eigenvalues();
  for (int i = 0; i < vals.size(); ++i) {
    if (vals[i] < -1e-10) {
      throw std::runtime_error("psd_sqrt: indefinite input");
    }
    vals[i] = std::sqrt(std::max(vals[i], 0.0));
  }
  return es.eigenvectors() * vals.cast<Complex>().asDiagonal() *
         es.eigenvectors().adjoint();
}

void check_povm(const BobPovm& povm, int dim) {
  Mat sum = povm.n_perp;
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) sum += povm.n[b][y];
  if ((sum - Mat::Identity(dim, dim)).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::runtime_error("povm: completeness violation");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(povm.n_perp, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw std::runtime_error("povm: negative no-click element");
  }
}

int a_index(int a, int x) { return 2 * a + x; }

Polarization signal_pol(int a, int x) {
  if (x == 0) return a == 0 ? Polarization::H : Polarization::V;
  return a == 0 ? Polarization::Plus : Polarization::Minus;
}

double p_basis(double p_z, int x) { return x == 0 ? p_z : 1.0 - p_z; }

// Two-mode (H,V) Fock space for Bob's arm only, used for the threshold
// detector model and the bypass-free simulated statistics.
struct TwoModeBasis {
  std::vector<std::pair<int, int>> occ;
  std::map<std::pair<int, int>, int> idx;
  int cutoff;

  explicit TwoModeBasis(int n) : cutoff(n) {
    for (int t = 0; t <= n; ++t)
      for (int h = t; h >= 0; --h) {
        idx[{h, t - h}] = static_cast<int>(occ.size());
        occ.push_back({h, t - h});
      }
  }
  int size() const { return static_cast<int>(occ.size()); }
};

// (c_h bH+ + c_v bV+)^n |0> / sqrt(n!) restricted to the truncation
Vec two_mode_state(const TwoModeBasis& b, int n, Complex c_h, Complex c_v) {
  Vec v = Vec::Zero(b.size());
  v[b.idx.at({0, 0})] = 1.0;
  for (int k = 0; k < n; ++k) {
    Vec next = Vec::Zero(b.size());
    for (int i = 0; i < b.size(); ++i) {
      if (v[i] == Complex(0.0)) continue;
      auto [h, vv] = b.occ[i];
      if (h + vv + 1 > b.cutoff) throw std::out_of_range("two_mode overflow");
      next[b.idx.at({h + 1, vv})] += v[i] * c_h * std::sqrt(h + 1.0);
      next[b.idx.at({h, vv + 1})] += v[i] * c_v * std::sqrt(vv + 1.0);
    }
    v = next;
  }
  double norm = 1.0;
  for (int k = 2; k <= n; ++k) norm *= k;
  return v / std::sqrt(norm);
}

Vec two_mode_signal(const TwoModeBasis& b, int n, Polarization pol) {
  double s = 1.0 / std::sqrt(2.0);
  switch (pol) {
    case Polarization::H: return two_mode_state(b, n, 1.0, 0.0);
    case Polarization::V: return two_mode_state(b, n, 0.0, 1.0);
    case Polarization::Plus: return two_mode_state(b, n, s, s);
    case Polarization::Minus: return two_mode_state(b, n, s, -s);
  }
  throw std::logic_error("two_mode_signal");
}

struct ThresholdPovm {
  Mat n[2][2];
  Mat n_perp;
};

// Threshold-detector elements on the two-mode space: detector clicks on any
// nonzero photon count in its polarization; double clicks are split half
// and half between the two bit values.
ThresholdPovm threshold_povm(double p_z, const TwoModeBasis& b) {
  ThresholdPovm out;
  int d = b.size();
  for (int bb = 0; bb < 2; ++bb)
    for (int y = 0; y < 2; ++y) out.n[bb][y] = Mat::Zero(d, d);

  for (int i = 0; i < d; ++i) {
    auto [h, v] = b.occ[i];
    if (h >= 1 && v == 0) out.n[0][0](i, i) = p_z;
    if (h == 0 && v >= 1) out.n[1][0](i, i) = p_z;
    if (h >= 1 && v >= 1) {
      out.n[0][0](i, i) = p_z / 2.0;
      out.n[1][0](i, i) = p_z / 2.0;
    }
  }
  // diagonal basis: same structure in the +/- mode decomposition
  double px = 1.0 - p_z;
  for (int t = 1; t <= b.cutoff; ++t) {
    for (int n = t; n >= 0; --n) {
      int m = t - n;
      double s = 1.0 / std::sqrt(2.0);
      Vec plus = two_mode_state(b, n, s, s);
      // build |n_+, m_-> by applying the minus mode on top of the plus part
      Vec st = plus;
      for (int k = 0; k < m; ++k) {
        Vec next = Vec::Zero(d);
        for (int i = 0; i < d; ++i) {
          if (st[i] == Complex(0.0)) continue;
          auto [hh, vv] = b.occ[i];
          if (hh + vv + 1 > b.cutoff) throw std::out_of_range("pm overflow");
          next[b.idx.at({hh + 1, vv})] += st[i] * s * std::sqrt(hh + 1.0);
          next[b.idx.at({hh, vv + 1})] -= st[i] * s * std::sqrt(vv + 1.0);
        }
        st = next;
      }
      double norm = 1.0;
      for (int k = 2; k <= m; ++k) norm *= k;
      st /= std::sqrt(norm);

      Mat proj = st * st.adjoint();
      if (n >= 1 && m == 0) out.n[0][1] += px * proj;
      if (n == 0 && m >= 1) out.n[1][1] += px * proj;
      if (n >= 1 && m >= 1) {
        out.n[0][1] += px / 2.0 * proj;
        out.n[1][1] += px / 2.0 * proj;
      }
    }
  }
  out.n_perp = Mat::Identity(d, d);
  for (int bb = 0; bb < 2; ++bb)
    for (int y = 0; y < 2; ++y) out.n_perp -= out.n[bb][y];
  return out;
}

// (I_A (x) K)[rho] for the single-photon depolarizer on the BF subspace;
// trace-scaled so it also acts on subnormalized blocks.
Mat depolarize_blocks(const Mat& rho, double q, const Mat& mix, int dim_a) {
  int d = mix.rows();
  Mat out = (1.0 - q) * rho;
  for (int i = 0; i < dim_a; ++i)
    for (int j = 0; j < dim_a; ++j) {
      Complex t = rho.block(i * d, j * d, d, d).trace();
      out.block(i * d, j * d, d, d) += q * t * mix;
    }
  return out;
}

BobPovm rotate_povm(const BobPovm& povm, const Mat& u2) {
  BobPovm out;
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y)
      out.n[b][y] = u2.adjoint() * povm.n[b][y] * u2;
  out.n_perp = u2.adjoint() * povm.n_perp * u2;
  return out;
}

// error / no-click operators on A (x) BF given a (possibly rotated) POVM
Mat error_op(const BobPovm& povm, int x, int dim_a, int dim_bf) {
  Mat op = Mat::Zero(dim_a * dim_bf, dim_a * dim_bf);
  for (int a = 0; a < 2; ++a) {
    Mat ma = Mat::Zero(dim_a, dim_a);
    ma(a_index(a, x), a_index(a, x)) = 1.0;
    op += kron(ma, povm.n[1 - a][x]);
  }
  return op;
}

Mat noclick_op(const BobPovm& povm, int dim_a) {
  return kron(Mat::Identity(dim_a, dim_a), povm.n_perp);
}

}  // namespace

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

Vec sp_source(double p_z, const SubspaceBasis& basis) {
  if (p_z <= 0.0 || p_z >= 1.0) {
    throw std::invalid_argument("sp_source: p_z outside (0,1)");
  }
  int d = basis.size();
  Vec psi = Vec::Zero(4 * d);
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      Vec ph = photon_block_state(1, signal_pol(a, x), 1.0, basis);
      psi.segment(a_index(a, x) * d, d) +=
          std::sqrt(p_basis(p_z, x) / 2.0) * ph;
    }
  return psi;
}

BobPovm sp_povm(double p_z, double eta_1, double eta_2,
                const SubspaceBasis& basis) {
  if (eta_1 < 0 || eta_1 > 1 || eta_2 < 0 || eta_2 > 1) {
    throw std::invalid_argument("sp_povm: efficiency outside [0,1]");
  }
  int d = basis.size();
  BobPovm out;
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) {
      Vec st = photon_block_state(1, signal_pol(b, y), 1.0, basis);
      double eff = (b == 0 ? eta_1 : eta_2);
      out.n[b][y] = eff * p_basis(p_z, y) * (st * st.adjoint());
    }
  out.n_perp = Mat::Identity(d, d);
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) out.n_perp -= out.n[b][y];
  Eigen::SelfAdjointEigenSolver<Mat> es(out.n_perp, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw std::runtime_error("sp_povm: completeness violation");
  }
  return out;
}

SpStats sp_statistics(const SpNoiseModel& m, bool printed_form) {
  double qq = 1.0 - (1.0 - m.eta_ch * m.eta_d) * (1.0 - m.p_d) * (1.0 - m.p_d);
  if (qq <= 0.0) throw std::runtime_error("sp_statistics: zero click rate");
  double err = printed_form
                   ? (m.e_0 * qq - (m.e_0 - m.e_d) * m.eta_ch * m.eta_d * m.p_d) / qq
                   : (m.e_0 * qq - (m.e_0 - m.e_d) * m.eta_ch * m.eta_d) / qq;
  return {qq, err};
}

SpMismatchStats sp_mismatch_statistics(const SpNoiseModel& m,
                                       const SubspaceBasis& basis) {
  int d = basis.size();
  Vec psi = sp_source(m.p_z, basis);
  Mat rho = psi * psi.adjoint();
  Vec bh = photon_block_state(1, Polarization::H, 1.0, basis);
  Vec bv = photon_block_state(1, Polarization::V, 1.0, basis);
  Mat mix = (bh * bh.adjoint() + bv * bv.adjoint()) / 2.0;
  Mat sim = depolarize_blocks(rho, m.q, mix, 4);

  BobPovm povm = sp_povm(m.p_z, m.eta_1, m.eta_2, basis);
  SpMismatchStats out;
  out.e_z = (error_op(povm, 0, 4, d) * sim).trace().real();
  out.e_x = (error_op(povm, 1, 4, d) * sim).trace().real();
  out.q_click = 1.0 - (noclick_op(povm, 4) * sim).trace().real();
  return out;
}

WcpSource wcp_source(const WcpModel& m, double eta_ae,
                     const SubspaceBasis& basis) {
  int d = basis.size();
  int nmax = basis.max_total();
  std::vector<double> pois(nmax + 1);
  double tail = 1.0;
  for (int n = 0; n <= nmax; ++n) {
    pois[n] = std::exp(-m.mu) * std::pow(m.mu, n) / std::tgamma(n + 1.0);
    tail -= pois[n];
  }
  WcpSource out;
  out.tail = tail;
  out.rho = Mat::Zero(4 * d, 4 * d);
  std::array<std::array<Vec, 2>, 2> phi_n;
  for (int n = 0; n <= nmax; ++n) {
    for (int a = 0; a < 2; ++a)
      for (int x = 0; x < 2; ++x)
        phi_n[a][x] = photon_block_state(n, signal_pol(a, x), eta_ae, basis);
    for (int a = 0; a < 2; ++a)
      for (int x = 0; x < 2; ++x)
        for (int ap = 0; ap < 2; ++ap)
          for (int xp = 0; xp < 2; ++xp) {
            double w =
                std::sqrt(p_basis(m.p_z, x) * p_basis(m.p_z, xp)) / 2.0;
            out.rho.block(a_index(a, x) * d, a_index(ap, xp) * d, d, d) +=
                w * pois[n] * (phi_n[a][x] * phi_n[ap][xp].adjoint());
          }
  }
  PartialTraceB pt(basis, 4);
  out.marginal_af = pt.apply(out.rho);
  return out;
}

BobPovm wcp_povm(double p_z, const SubspaceBasis& basis) {
  int d = basis.size();
  int nmax = basis.max_total();
  TwoModeBasis two(nmax);
  ThresholdPovm tp = threshold_povm(p_z, two);

  auto lift = [&](const Mat& tilde) {
    Mat out = Mat::Zero(d, d);
    for (int s = 0; s < d; ++s)
      for (int sp = 0; sp < d; ++sp) {
        const auto& a = basis.at(s);
        const auto& b = basis.at(sp);
        if (a.n_fh == b.n_fh && a.n_fv == b.n_fv) {
          out(s, sp) = tilde(two.idx.at({a.n_bh, a.n_bv}),
                             two.idx.at({b.n_bh, b.n_bv}));
        }
      }
    return out;
  };
  BobPovm out;
  for (int b = 0; b < 2; ++b)
    for (int y = 0; y < 2; ++y) out.n[b][y] = lift(tp.n[b][y]);
  out.n_perp = lift(tp.n_perp);
  check_povm(out, d);
  return out;
}

WcpStats wcp_statistics(const WcpModel& m) {
  if (m.sim_cutoff < 10) {
    throw std::invalid_argument("wcp_statistics: cutoff too small");
  }
  TwoModeBasis two(m.sim_cutoff);
  int d = two.size();
  std::vector<double> pois(m.sim_cutoff + 1);
  double tail = 1.0;
  for (int n = 0; n <= m.sim_cutoff; ++n) {
    pois[n] = std::exp(-m.mu) * std::pow(m.mu, n) / std::tgamma(n + 1.0);
    tail -= pois[n];
  }
  if (tail > 1e-12) {
    throw std::runtime_error("wcp_statistics: Poisson tail above tolerance");
  }

  // A-blocks of the bypass-free phase-randomized state
  std::array<std::array<std::vector<Vec>, 2>, 2> sig;
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      sig[a][x].resize(m.sim_cutoff + 1);
      for (int n = 0; n <= m.sim_cutoff; ++n)
        sig[a][x][n] = two_mode_signal(two, n, signal_pol(a, x));
    }
  Mat mix = Mat::Zero(d, d);
  mix(two.idx.at({1, 0}), two.idx.at({1, 0})) = 0.5;
  mix(two.idx.at({0, 1}), two.idx.at({0, 1})) = 0.5;

  ThresholdPovm tp = threshold_povm(m.p_z, two);

  WcpStats out{};
  double noclick_total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      // diagonal A-block of rho_sim for (a,x)
      Mat blk = Mat::Zero(d, d);
      for (int n = 0; n <= m.sim_cutoff; ++n)
        blk += pois[n] * (sig[a][x][n] * sig[a][x][n].adjoint());
      blk *= p_basis(m.p_z, x) / 2.0;
      Complex tr = blk.trace();
      blk = (1.0 - m.q) * blk + m.q * tr * mix;

      for (int b = 0; b < 2; ++b)
        for (int y = 0; y < 2; ++y)
          out.p[a][b][x][y] = (tp.n[b][y] * blk).trace().real();
      out.p_noclick[a][x] = (tp.n_perp * blk).trace().real();
      noclick_total += out.p_noclick[a][x];
    }
  out.q_mu = 1.0 - noclick_total;
  double expected = 1.0 - (1.0 - m.q) * std::exp(-m.mu);
  if (std::abs(out.q_mu - expected) > 1e-9) {
    throw std::runtime_error("wcp_statistics: closed-form cross-check failed");
  }
  double pz2 = m.p_z * m.p_z, px2 = (1 - m.p_z) * (1 - m.p_z);
  out.e_z = (out.p[0][1][0][0] + out.p[1][0][0][0]) / (pz2 * out.q_mu);
  out.e_x = (out.p[0][1][1][1] + out.p[1][0][1][1]) / (px2 * out.q_mu);
  return out;
}

double ec_term(double p_z, double q_click, double e) {
  return (1.0 - 2.0 * p_z * (1.0 - p_z)) * q_click * binary_entropy(e);
}

double baseline_sp_normal(double p_z, double q_click, double e) {
  return (1.0 - 2.0 * p_z * (1.0 - p_z)) * q_click *
         (1.0 - 2.0 * binary_entropy(e));
}

double baseline_sp_bypass(double p_z, double q_click, double e,
                          double eta_ae) {
  double s0 = std::max(q_click - eta_ae, 0.0);
  double s11 = std::max(q_click - (1.0 - eta_ae), 0.0);
  double eps11 = s11 > 0 ? std::min(e * q_click / s11, 0.5) : 0.5;
  return (1.0 - 2.0 * p_z * (1.0 - p_z)) * q_click *
         (-binary_entropy(e) +
          s11 / q_click * (1.0 - binary_entropy(eps11)) + s0 / q_click);
}

double baseline_wcp_bypass(double p_z, double mu, double q_mu, double e_mu,
                           double eta_ae) {
  double s0 = std::max(q_mu - (1.0 - std::exp(-mu * eta_ae)), 0.0);
  double s11 = std::max(q_mu - (1.0 - mu * eta_ae * std::exp(-mu)), 0.0);
  double eps11 = s11 > 0 ? std::min(e_mu * q_mu / s11, 0.5) : 0.5;
  return (1.0 - 2.0 * p_z * (1.0 - p_z)) * q_mu *
         (-binary_entropy(e_mu) +
          s11 / q_mu * (1.0 - binary_entropy(eps11)) + s0 / q_mu);
}

double tilted_rate(double eta_1, double eta_2, double p_z) {
  double avg = (eta_1 + eta_2) / 2.0;
  double arg = std::max(eta_1, eta_2) / (eta_1 + eta_2);
  return avg * (1.0 - 2.0 * p_z * (1.0 - p_z)) * binary_entropy(arg);
}

namespace {

Scenario make_sp_common(const SpNoiseModel& m, const BypassParams& bp,
                        double epsilon, bool mismatch) {
  Scenario sc;
  sc.kind = mismatch ? ProtocolKind::SpMismatch : ProtocolKind::Sp;
  sc.basis = SubspaceBasis::enumerate(1);
  sc.bypass = bp;
  sc.p_z = m.p_z;
  sc.epsilon = epsilon;
  sc.weight = 0.0;
  int d = sc.basis.size();

  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      sc.alice[a][x] = Mat::Zero(4, 4);
      sc.alice[a][x](a_index(a, x), a_index(a, x)) = 1.0;
    }
  sc.bob = sp_povm(m.p_z, m.eta_1, m.eta_2, sc.basis);
  Mat u2 = beam_splitter(sc.basis, bp.eta_t, BsConvention::U2);
  sc.bob_rot = rotate_povm(sc.bob, u2);

  Vec psi = sp_source(m.p_z, sc.basis);
  Mat u1 = kron(Mat::Identity(4, 4),
                beam_splitter(sc.basis, bp.eta_ae, BsConvention::U1));
  Vec psi2 = u1 * psi;
  sc.rho_init = psi2 * psi2.adjoint();
  PartialTraceB pt(sc.basis, 4);
  sc.marginal_af = pt.apply(sc.rho_init);

  double ez, ex, qq;
  if (mismatch) {
    SpMismatchStats st = sp_mismatch_statistics(m, sc.basis);
    ez = st.e_z;
    ex = st.e_x;
    qq = st.q_click;
    double e_sift = ez / (m.p_z * m.p_z * qq);
    sc.ec_bits = ec_term(m.p_z, qq, std::min(e_sift, 0.5));
  } else {
    SpStats st = sp_statistics(m);
    qq = st.q_click;
    ez = m.p_z * m.p_z * qq * st.e;
    ex = (1 - m.p_z) * (1 - m.p_z) * qq * st.e;
    sc.ec_bits = ec_term(m.p_z, qq, st.e);
  }
  sc.observables.push_back({error_op(sc.bob_rot, 0, 4, d), ez, "E_Z"});
  sc.observables.push_back({error_op(sc.bob_rot, 1, 4, d), ex, "E_X"});
  sc.observables.push_back({noclick_op(sc.bob_rot, 4), 1.0 - qq, "no_click"});
  return sc;
}

}  // namespace

Scenario make_sp_scenario(const SpNoiseModel& m, const BypassParams& bp,
                          double epsilon) {
  return make_sp_common(m, bp, epsilon, false);
}

Scenario make_sp_mismatch_scenario(const SpNoiseModel& m,
                                   const BypassParams& bp, double epsilon) {
  return make_sp_common(m, bp, epsilon, true);
}

Scenario make_wcp_scenario(const WcpModel& m, const BypassParams& bp,
                           double weight, double epsilon) {
  Scenario sc;
  sc.kind = ProtocolKind::Wcp;
  sc.basis = SubspaceBasis::enumerate(2);
  sc.bypass = bp;
  sc.p_z = m.p_z;
  sc.epsilon = epsilon;
  sc.weight = weight;
  int d = sc.basis.size();

  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      sc.alice[a][x] = Mat::Zero(4, 4);
      sc.alice[a][x](a_index(a, x), a_index(a, x)) = 1.0;
    }
  sc.bob = wcp_povm(m.p_z, sc.basis);
  Mat u2 = beam_splitter(sc.basis, bp.eta_t, BsConvention::U2);
  sc.bob_rot = rotate_povm(sc.bob, u2);

  WcpSource src = wcp_source(m, bp.eta_ae, sc.basis);
  sc.rho_init = src.rho;
  sc.marginal_af = src.marginal_af;

  WcpStats st = wcp_statistics(m);
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      for (int b = 0; b < 2; ++b)
        for (int y = 0; y < 2; ++y) {
          sc.observables.push_back(
              {kron(sc.alice[a][x], sc.bob_rot.n[b][y]), st.p[a][b][x][y],
               "p_" + std::to_string(a) + std::to_string(b) +
                   std::to_string(x) + std::to_string(y)});
        }
      sc.observables.push_back(
          {kron(sc.alice[a][x], sc.bob_rot.n_perp), st.p_noclick[a][x],
           "noclick_" + std::to_string(a) + std::to_string(x)});
    }
  sc.ec_bits = ec_term(m.p_z, st.q_mu, std::min(st.e_z, 0.5));
  return sc;
}

AttackResult simulate_explicit_attack(const Mat& u_attack, int dim_e,
                                      const Scenario& sc) {
  if (sc.kind == ProtocolKind::Wcp) {
    throw std::invalid_argument("explicit attack oracle is single-photon only");
  }
  int d = sc.basis.size();
  if (d != 5) throw std::invalid_argument("unexpected subspace size");
  int db = 3 * dim_e;
  if (u_attack.rows() != db || u_attack.cols() != db) {
    throw std::invalid_argument("attack dimension mismatch");
  }
  if ((u_attack.adjoint() * u_attack - Mat::Identity(db, db))
          .cwiseAbs()
          .maxCoeff() > 1e-10) {
    throw std::invalid_argument("attack not unitary");
  }
  // the vacuum sector of B must be invariant, otherwise the attacked state
  // leaves the truncated subspace
  if (u_attack.block(dim_e, 0, 2 * dim_e, dim_e).cwiseAbs().maxCoeff() >
          1e-12 ||
      u_attack.block(0, dim_e, dim_e, 2 * dim_e).cwiseAbs().maxCoeff() >
          1e-12) {
    throw std::invalid_argument("attack creates photons from vacuum");
  }

  // subspace index -> (B sector, same-sector partner map)
  // states: 0 vac, 1 BH, 2 BV, 3 FH, 4 FV  (B sectors 0,1,2,0,0)
  const int bsec[5] = {0, 1, 2, 0, 0};

  Vec psi = sp_source(sc.p_z, sc.basis);
  Mat u1 = Eigen::kroneckerProduct(
               Mat::Identity(4, 4),
               beam_splitter(sc.basis, sc.bypass.eta_ae, BsConvention::U1))
               .eval();
  psi = u1 * psi;

  // full vector on A (x) BF (x) E, index (i*d + s)*dim_e + e
  Vec full = Vec::Zero(4 * d * dim_e);
  for (int i = 0; i < 4; ++i)
    for (int s = 0; s < d; ++s) full[(i * d + s) * dim_e] = psi[i * d + s];

  // apply the attack on (B sector, E)
  Vec attacked = Vec::Zero(full.size());
  for (int i = 0; i < 4; ++i)
    for (int s = 0; s < d; ++s)
      for (int e = 0; e < dim_e; ++e) {
        Complex amp = full[(i * d + s) * dim_e + e];
        if (amp == Complex(0.0)) continue;
        int col = bsec[s] * dim_e + e;
        for (int bp2 = 0; bp2 < 3; ++bp2)
          for (int ep = 0; ep < dim_e; ++ep) {
            Complex u = u_attack(bp2 * dim_e + ep, col);
            if (u == Complex(0.0)) continue;
            // cross-sector entries are zero by the structure check, so the
            // output sector matches the input one
            if ((bsec[s] == 0) != (bp2 == 0)) continue;
            int sp = (s >= 3) ? s : bp2;
            attacked[(i * d + sp) * dim_e + ep] += amp * u;
          }
      }

  AttackResult out;
  // Eve-traced state before the second beam splitter
  out.rho_abf = Mat::Zero(4 * d, 4 * d);
  for (int r = 0; r < 4 * d; ++r)
    for (int c = 0; c < 4 * d; ++c)
      for (int e = 0; e < dim_e; ++e)
        out.rho_abf(r, c) += attacked[r * dim_e + e] *
                             std::conj(attacked[c * dim_e + e]);

  // propagate through the second beam splitter
  Mat u2 = beam_splitter(sc.basis, sc.bypass.eta_t, BsConvention::U2);
  Vec final_v = Vec::Zero(attacked.size());
  for (int i = 0; i < 4; ++i)
    for (int e = 0; e < dim_e; ++e) {
      Vec slice(d);
      for (int s = 0; s < d; ++s) slice[s] = attacked[(i * d + s) * dim_e + e];
      Vec rotated = u2 * slice;
      for (int s = 0; s < d; ++s)
        final_v[(i * d + s) * dim_e + e] = rotated[s];
    }

  // direct conditional entropy, summed over key bases
  out.pass_entropy = 0.0;
  for (int x = 0; x < 2; ++x) {
    Mat kx = psd_sqrt(sc.bob.n[0][x] + sc.bob.n[1][x]);
    std::array<Mat, 2> rho_e;
    for (int a = 0; a < 2; ++a) {
      int ia = a_index(a, x);
      // chi on BF (x) E
      Mat chi = Mat::Zero(d, dim_e);
      for (int s = 0; s < d; ++s)
        for (int e = 0; e < dim_e; ++e)
          chi(s, e) = final_v[(ia * d + s) * dim_e + e];
      chi = kx * chi;
      rho_e[a] = Mat::Zero(dim_e, dim_e);
      for (int e = 0; e < dim_e; ++e)
        for (int ep = 0; ep < dim_e; ++ep)
          for (int s = 0; s < d; ++s)
            rho_e[a](e, ep) += chi(s, e) * std::conj(chi(s, ep));
    }
    out.pass_entropy += entropy_bits(rho_e[0]) + entropy_bits(rho_e[1]) -
                        entropy_bits(rho_e[0] + rho_e[1]);
  }

  // observed statistics under the attack (expectations of the un-rotated
  // error/no-click operators on the post-U2 state)
  auto expect = [&](const Mat& op_abf) {
    Complex v = 0.0;
    for (int r = 0; r < 4 * d; ++r)
      for (int c = 0; c < 4 * d; ++c) {
        if (op_abf(r, c) == Complex(0.0)) continue;
        Complex overlap = 0.0;
        for (int e = 0; e < dim_e; ++e)
          overlap += std::conj(final_v[r * dim_e + e]) *
                     final_v[c * dim_e + e];
        v += op_abf(r, c) * overlap;
      }
    return v.real();
  };
  out.e_z = expect(error_op(sc.bob, 0, 4, d));
  out.e_x = expect(error_op(sc.bob, 1, 4, d));
  out.p_noclick = expect(noclick_op(sc.bob, 4));
  return out;
}

Mat random_blocked_attack(int dim_e, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto haar = [&](int n) {
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i) {
      Complex ph = r(i, i) / std::abs(r(i, i));
      q.col(i) *= ph;
    }
    return q;
  };
  Mat u = Mat::Zero(3 * dim_e, 3 * dim_e);
  u.block(0, 0, dim_e, dim_e) = haar(dim_e);
  u.block(dim_e, dim_e, 2 * dim_e, 2 * dim_e) = haar(2 * dim_e);
  return u;
}

}  // namespace bqkd
