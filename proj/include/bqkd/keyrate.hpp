#ifndef BQKD_KEYRATE_HPP
#define BQKD_KEYRATE_HPP

#include <array>

#include "bqkd/protocol.hpp"

namespace bqkd {

/// Key-map data for the post-selected relative-entropy objective. For each
/// key basis x the channel G_x[rho] = V_x Pbar_x rho Pbar_x V_x^dag embeds a
/// two-dimensional key register; its image is supported on the span of
/// |a>_key (x) |a,x>_A (x) BF, so we carry a compact Kraus matrix t[x] whose
/// output dimension is 2*dim_bf instead of the full dim_prime.
struct KeyMapBundle {
  double epsilon = 1e-8;
  int dim_bf = 0;
  int dim_abf = 0;    // 4 * dim_bf
  int dim_prime = 0;  // 2 * dim_abf, dimension after the key register
  std::array<Mat, 2> p;  // P_x on BF
  std::array<Mat, 2> v;  // V_x, dim_prime x dim_abf
  std::array<Mat, 2> t;  // compact Kraus, (2*dim_bf) x dim_abf
};

KeyMapBundle build_key_maps(const Scenario& sc);

struct ObjectiveValue {
  double value = 0.0;  // bits
  std::array<double, 2> per_basis{0.0, 0.0};
  double floor_before = 0.0;  // min eigenvalue seen before the depolarizer
  double floor_after = 0.0;   // and after
};

/// sum_x D(G_eps^x[rho] || Z[G_eps^x[rho]]) in bits, with Z the key-register
/// pinching and G_eps^x the channel followed by mixing epsilon of the
/// maximally mixed state. Accepts subnormalized rho.
ObjectiveValue f_eps(const Mat& rho, const KeyMapBundle& bundle);

/// Gradient in the transposed pairing: d/dt f(rho + t Delta) at t=0 equals
/// tr[Delta^T grad_f_eps(rho)].
Mat grad_f_eps(const Mat& rho, const KeyMapBundle& bundle);

/// Perturbation penalty 2 eps (d'-1) log2(d' / (eps (d'-1))).
double zeta_eps(double eps, int d_prime);

}  // namespace bqkd

#endif  // BQKD_KEYRATE_HPP
