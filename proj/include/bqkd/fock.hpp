#ifndef BQKD_FOCK_HPP
#define BQKD_FOCK_HPP

#include <array>
#include <complex>
#include <compare>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace bqkd {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Photon counts for the four modes: two spatial arms (B = towards Eve,
/// F = bypass), each with H and V polarization.
struct ModeOccupation {
  int n_bh = 0;
  int n_bv = 0;
  int n_fh = 0;
  int n_fv = 0;

  int total() const { return n_bh + n_bv + n_fh + n_fv; }
  int b_total() const { return n_bh + n_bv; }
  int f_total() const { return n_fh + n_fv; }

  friend auto operator<=>(const ModeOccupation&, const ModeOccupation&) = default;
};

/// Occupation pair for the bypass arm only, used by partial traces over B.
struct FOccupation {
  int n_fh = 0;
  int n_fv = 0;
  friend auto operator<=>(const FOccupation&, const FOccupation&) = default;
};

/// Ordered basis of all four-mode occupations with total photon number up to
/// a cutoff. Ordering is canonical: ascending total, then descending
/// lexicographic on (n_bh, n_bv, n_fh, n_fv), so the single-photon layer
/// reads BH, BV, FH, FV and matrices are reproducible across runs.
class SubspaceBasis {
 public:
  static SubspaceBasis enumerate(int max_total_photons);

  int size() const { return static_cast<int>(states_.size()); }
  int max_total() const { return max_total_; }
  const ModeOccupation& at(int i) const { return states_[i]; }
  const std::vector<ModeOccupation>& states() const { return states_; }

  /// Position of an occupation, or nullopt if outside the subspace.
  std::optional<int> index_of(const ModeOccupation& occ) const;

  /// Indices of basis states whose total photon number equals n.
  std::vector<int> layer(int n) const;

  /// Distinct F occupations appearing in the basis, canonical order
  /// (ascending F total, then descending lexicographic).
  std::vector<FOccupation> f_support() const;

 private:
  std::vector<ModeOccupation> states_;
  std::map<ModeOccupation, int> index_;
  int max_total_ = 0;
};

enum class BsConvention {
  U1,  // b -> sqrt(eta) b + sqrt(1-eta) f,  f -> sqrt(1-eta) b - sqrt(eta) f
  U2,  // b -> -sqrt(eta) b + sqrt(1-eta) f, f -> sqrt(1-eta) b + sqrt(eta) f
};

enum class Polarization { H, V, Plus, Minus };

/// Beam-splitter unitary on the truncated basis, acting identically on both
/// polarizations. Built blockwise by multinomial expansion of the
/// creation-operator images, so it conserves total photon number exactly and
/// is unitary within the truncation.
Mat beam_splitter(const SubspaceBasis& basis, double eta, BsConvention conv);

/// Diagonal 0/1 projector selecting states with the given photon totals in
/// the B and/or F arms; std::nullopt means "any".
Mat photon_projector(const SubspaceBasis& basis, std::optional<int> k_b,
                     std::optional<int> k_f);

/// Normalized n-photon state (sqrt(eta) b+ + sqrt(1-eta) f+)^n |0> / sqrt(n!)
/// for the given polarization, expanded in the basis.
Vec photon_block_state(int n, Polarization pol, double eta_ae,
                       const SubspaceBasis& basis);

/// Sum of absolute eigenvalues of a Hermitian matrix.
double trace_norm(const Mat& op, double herm_tol = 1e-10);

/// Partial trace over arm B for operators on A (x) span(basis), where the
/// span is generally not a tensor product of B and F factors. The trace is
/// evaluated with the finite kernel <k|tr_B rho|l> = sum_{i in S_k ^ S_l}
/// <i,k|rho|i,l>, blockwise over the A factor.
class PartialTraceB {
 public:
  PartialTraceB(const SubspaceBasis& basis, int dim_a);

  int dim_a() const { return dim_a_; }
  int dim_in() const { return dim_a_ * dim_bf_; }
  int dim_out() const { return dim_a_ * dim_f_; }
  int dim_f() const { return dim_f_; }
  const std::vector<FOccupation>& f_basis() const { return f_basis_; }

  /// tr_B of an operator on A (x) span(basis); result lives on A (x) F'.
  Mat apply(const Mat& op) const;

  /// Hilbert-Schmidt adjoint: embeds an operator on A (x) F' back into
  /// A (x) span(basis). Used for constraint/dual assembly.
  Mat adjoint(const Mat& op_af) const;

  /// Nonzero pattern: list of (subspace index pair (s,s')) contributing to
  /// output F pair (k,l). Exposed so constraint assembly can stay sparse.
  struct KernelEntry {
    int s;
    int sp;
    int k;
    int l;
  };
  const std::vector<KernelEntry>& kernel() const { return kernel_; }

 private:
  int dim_a_;
  int dim_bf_;
  int dim_f_;
  std::vector<FOccupation> f_basis_;
  std::map<FOccupation, int> f_index_;
  std::vector<KernelEntry> kernel_;
};

/// Apply one creation operator sum c_bh*bH+ + c_bv*bV+ + c_fh*fH+ + c_fv*fV+
/// to a vector expressed in the basis. Components that would leave the
/// truncation are an error unless allow_overflow_drop is set.
Vec apply_creation(const SubspaceBasis& basis, const Vec& in,
                   const std::array<Complex, 4>& coeffs,
                   bool allow_overflow_drop = false);

/// Number of four-mode occupations with total <= n: sum_{k<=n} C(k+3,3).
long basis_size_for(int max_total_photons);

}  // namespace bqkd

#endif  // BQKD_FOCK_HPP
