#ifndef BQKD_PROTOCOL_HPP
#define BQKD_PROTOCOL_HPP

#include <array>
#include <string>
#include <vector>

#include "bqkd/fock.hpp"

namespace bqkd {

struct BypassParams {
  double eta_ae = 1.0;  // Alice -> Eve arm transmissivity
  double eta_t = 1.0;   // Eve -> Bob arm transmissivity
};

struct SpNoiseModel {
  double eta_ch = 0.001;
  double eta_d = 0.9;
  double e_d = 0.01;
  double p_d = 1e-7;
  double p_z = 0.5;
  double e_0 = 0.5;
  double q = 0.0;      // depolarizing strength (mismatched-detector variant)
  double eta_1 = 1.0;  // efficiency of the b=0 detector
  double eta_2 = 1.0;  // efficiency of the b=1 detector
};

struct WcpModel {
  double mu = 0.5;
  double q = 0.02;
  double p_z = 0.5;
  int sim_cutoff = 20;  // photon cutoff for simulated statistics
};

enum class ProtocolKind { Sp, SpMismatch, Wcp };

/// Bob's five-outcome measurement on the truncated BF subspace. n[b][y] is
/// the element for bit b in basis y; n_perp completes to the identity.
struct BobPovm {
  std::array<std::array<Mat, 2>, 2> n;
  Mat n_perp;
};

/// One statistics constraint: tr[op rho] should hit target (exactly when the
/// scenario weight is zero, within a weight-sized window below otherwise).
struct Observable {
  Mat op;  // on A (x) subspace, rotated through the second beam splitter
  double target = 0.0;
  std::string label;
};

struct Scenario {
  ProtocolKind kind = ProtocolKind::Sp;
  SubspaceBasis basis;
  BypassParams bypass;
  double p_z = 0.5;
  double epsilon = 1e-8;
  double weight = 0.0;   // W, probability mass outside the subspace
  double ec_bits = 0.0;  // error-correction leakage term
  std::array<std::array<Mat, 2>, 2> alice;  // M_{a,x} on A, |a,x> at 2a+x
  BobPovm bob;       // un-rotated elements
  BobPovm bob_rot;   // U2-conjugated elements
  Mat rho_init;      // honest (truncated) source state on A (x) subspace
  Mat marginal_af;   // tr_B of rho_init, the source-replacement target
  std::vector<Observable> observables;
};

// -- single-photon protocol --

/// Source state sum_{a,x} sqrt(p_x/2)|a,x> (x) |1 photon, basis x, bit a>.
Vec sp_source(double p_z, const SubspaceBasis& basis);

/// Five-outcome single-photon POVM; detector b has efficiency eta_b+1.
BobPovm sp_povm(double p_z, double eta_1, double eta_2,
                const SubspaceBasis& basis);

struct SpStats {
  double q_click;  // total single-click probability
  double e;        // QBER, same in both bases
};

/// Simulated click/error statistics for matched detectors. The printed-form
/// flag keeps the dark-count factor inside the error term (see README notes
/// on the error-rate formula); default drops it.
SpStats sp_statistics(const SpNoiseModel& model, bool printed_form = false);

struct SpMismatchStats {
  double e_z;      // tr of the Z-error operator on the depolarized state
  double e_x;
  double q_click;  // click probability
};

SpMismatchStats sp_mismatch_statistics(const SpNoiseModel& model,
                                       const SubspaceBasis& basis);

// -- weak-coherent-pulse protocol --

struct WcpSource {
  Mat rho;          // truncated (subnormalized) source state on A (x) basis
  double tail;      // Poisson mass beyond the subspace cutoff
  Mat marginal_af;  // tr_B of rho
};

WcpSource wcp_source(const WcpModel& model, double eta_ae,
                     const SubspaceBasis& basis);

/// Threshold-detector POVM restricted to the <=2 photon
/// subspace; double clicks split half/half into b=0 and b=1.
BobPovm wcp_povm(double p_z, const SubspaceBasis& basis);

struct WcpStats {
  double p[2][2][2][2];   // p[a][b][x][y], click outcomes
  double p_noclick[2][2]; // per (a,x)
  double q_mu;            // detection probability
  double e_z;
  double e_x;
};

WcpStats wcp_statistics(const WcpModel& model);

// -- shared pieces --

double binary_entropy(double p);

/// Error-correction leakage (1 - 2 p_z (1-p_z)) Q H_bin(E), in bits.
double ec_term(double p_z, double q_click, double e);

/// Analytic reference rates.
double baseline_sp_normal(double p_z, double q_click, double e);
double baseline_sp_bypass(double p_z, double q_click, double e, double eta_ae);
double baseline_wcp_bypass(double p_z, double mu, double q_mu, double e_mu,
                           double eta_ae);
double tilted_rate(double eta_1, double eta_2, double p_z);

// -- scenario builders --

Scenario make_sp_scenario(const SpNoiseModel& model, const BypassParams& bp,
                          double epsilon = 1e-8);
Scenario make_sp_mismatch_scenario(const SpNoiseModel& model,
                                   const BypassParams& bp,
                                   double epsilon = 1e-8);
Scenario make_wcp_scenario(const WcpModel& model, const BypassParams& bp,
                           double weight, double epsilon = 1e-8);

// -- explicit attack oracle --

struct AttackResult {
  double pass_entropy;  // Pr[pass] * H(key | bases, Eve), bits
  Mat rho_abf;          // Eve-traced state on A (x) subspace, before U2
  double e_z;           // observed error statistics under the attack
  double e_x;
  double p_noclick;
};

/// Brute-force evaluation of a single-photon scenario under an explicit
/// eavesdropping unitary on B (x) E. The unitary must be block diagonal with
/// respect to the B photon number (indexing: (vac, 1_BH, 1_BV) major, Eve
/// minor) so the attacked state stays inside the truncated subspace.
AttackResult simulate_explicit_attack(const Mat& u_attack, int dim_e,
                                      const Scenario& sc);

/// Haar-ish random attack of the admissible block form, for property tests.
Mat random_blocked_attack(int dim_e, unsigned seed);

}  // namespace bqkd

#endif  // BQKD_PROTOCOL_HPP
