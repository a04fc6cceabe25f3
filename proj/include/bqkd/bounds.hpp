#ifndef BQKD_BOUNDS_HPP
#define BQKD_BOUNDS_HPP

#include <functional>
#include <string>
#include <vector>

#include "bqkd/keyrate.hpp"
#include "bqkd/sdp.hpp"

namespace bqkd {

/// The feasible set of the key-rate optimization, embedded as a real SDP.
/// When `blocked`, the variable is restricted to blocks that are diagonal
/// across total-photon layers of the BF subspace; this is lossless because
/// every constraint operator commutes with the layer pinching, the honest
/// marginal is layer-diagonal, and the objective contracts under pinching.
struct FeasibleSetSpec {
  SdpProblem problem;  // constraints only; objectives are swapped in per use
  int dim = 0;         // complex dimension of the A (x) BF variable
  double w = 0.0;
  std::vector<std::vector<int>> blocks;  // ABF indices per variable block
  // per-block isometry onto the face of the PSD cone cut out by the
  // low-rank marginal equalities (facial reduction; the W = 0 set has no
  // interior without it and interior-point solves stall)
  std::vector<Mat> frames;
  int stat_rows = 0;
  int marginal_rows = 0;
};

struct AssembleOptions {
  bool blocked = true;
  bool include_statistics = true;
  bool include_marginal = true;  // bypass (source-replacement) constraint
};

/// W = 0: statistics / marginal / normalization equalities. W > 0: interval
/// statistics [p - W, p], trace in [1 - W, 1], and a trace-norm ball of
/// radius sqrt(W) (in the half-trace-norm) around the honest AF marginal.
FeasibleSetSpec assemble_constraints(const Scenario& sc, double w,
                                     const AssembleOptions& opt = {});

std::vector<RMat> to_blocks(const FeasibleSetSpec& spec, const Mat& rho);
Mat from_blocks(const FeasibleSetSpec& spec, const std::vector<RMat>& x);

/// Clamp tiny negative eigenvalues (solver noise) and rescale the trace back
/// to at most one.
Mat sanitize_psd(const Mat& rho);

struct FwOptions {
  double delta = 1e-6;  // stop when |tr[Delta^T grad]| < delta (bits)
  int max_iter = 300;
  double line_tol = 1e-10;
  SdpOptions sdp;
};

enum class FwStop { Tolerance, MaxIter, Stalled, SolverTrouble };

struct FwTrace {
  std::vector<double> values;
  std::vector<double> step_sizes;
  std::vector<double> linear_improvements;
  Mat rho_star;
  double final_value = 0.0;
  FwStop stop = FwStop::MaxIter;
  int iterations = 0;
};

/// Conditional-gradient minimization of f_eps over the feasible set, with a
/// linear-SDP direction subproblem and golden-section exact line search.
FwTrace frank_wolfe(const FeasibleSetSpec& spec, const KeyMapBundle& kb,
                    const Mat& rho0, const FwOptions& opt = {});

struct CertifiedRate {
  double fw_value = 0.0;     // f_eps at the Frank-Wolfe iterate
  double beta = 0.0;         // certified minimum of the linearization
  double lower_bound = 0.0;  // f - tr[rho^T grad] + beta - 2 zeta
  double ec_term = 0.0;
  double key_rate = 0.0;  // lower_bound - ec_term
  double dual_gap = 0.0;  // fw_value - lower_bound
  bool certified = false;
};

/// Linearized dual bound at any feasible rho_star; sound regardless of how
/// far Frank-Wolfe converged (only tightness suffers).
CertifiedRate certified_lower_bound(const Mat& rho_star,
                                    const FeasibleSetSpec& spec,
                                    const KeyMapBundle& kb, double ec);

/// Smallest eigenvalue of the double-click operator on the N-photon
/// two-mode block: 1/2 - 1/2 sqrt((2p_z-1)^2 + c 2^{-N} p_z(1-p_z)),
/// c = 8 for odd N, 16 for even N.
double lambda_min_dc(int n, double p_z);

struct WeightReport {
  double lambda = 0.0;  // lambda_min at N+1 photons
  double w_b = 0.0;     // double-click bound on the B-side weight
  double w_f = 0.0;     // exact bypass-arm tail
  double w = 0.0;
};

/// Subspace-weight bound from the double-click rate q_dc (valid for
/// eta_T = 1 analyses); requires N >= 2.
WeightReport weight_bound(double q_dc, int n, double p_z, double f_tail);

/// Poisson tail mass beyond n: 1 - sum_{k<=n} e^-mu mu^k / k!.
double poisson_tail(double mu, int n);

struct PipelinePoint {
  bool feasible = false;
  FwTrace trace;
  CertifiedRate rate;
  double wall_ms = 0.0;
};

/// Feasibility check, Frank-Wolfe from the feasibility witness, and the
/// certified bound, in one call.
PipelinePoint certified_pipeline(const Scenario& sc, double w,
                                 const AssembleOptions& aopt = {},
                                 const FwOptions& fopt = {});

struct ScanResult {
  std::vector<double> grid;
  std::vector<PipelinePoint> points;
  bool any_feasible = false;
  double min_rate = 0.0;
  double argmin_eta_t = 0.0;
  double band_lo = 0.0;  // feasible-band edges, bisection-refined to 1e-3
  double band_hi = 0.0;
};

ScanResult scan_eta_T(const std::function<Scenario(double)>& factory,
                      const std::vector<double>& grid, double w,
                      const AssembleOptions& aopt = {},
                      const FwOptions& fopt = {});

}  // namespace bqkd

#endif  // BQKD_BOUNDS_HPP
