#ifndef BQKD_SDP_HPP
#define BQKD_SDP_HPP

#include <optional>
#include <string>
#include <vector>

#include "bqkd/fock.hpp"

namespace bqkd {

// Small dense SDP layer over real symmetric block-diagonal variables,
// minimization convention:
//   min <C, X>  s.t.  <A_k, X> {=, <=, >=} b_k,  X >= 0.
// Complex Hermitian data enters through embed_real (traces double there;
// callers carry the factor of two).

enum class ConstraintKind { Eq, Le, Ge };
enum class SdpStatus { Optimal, Infeasible, MaxIter, NumericalTrouble };

struct SparseEntry {
  int block;
  int row;
  int col;
  double value;
};

struct SdpConstraint {
  std::vector<SparseEntry> a;  // literal entries of a symmetric matrix
  ConstraintKind kind = ConstraintKind::Eq;
  double b = 0.0;
};

struct SdpProblem {
  std::vector<int> block_dims;
  std::vector<SparseEntry> c;
  std::vector<SdpConstraint> constraints;
};

struct SdpOptions {
  double gap_tol = 1e-9;
  double feas_tol = 1e-9;
  int max_iter = 200;
};

struct SdpSolution {
  std::vector<RMat> x;  // one matrix per problem block (slacks stripped)
  RVec y;               // per original constraint; pruned rows get 0
  SdpStatus status = SdpStatus::NumericalTrouble;
  double primal_obj = 0.0;
  double dual_obj = 0.0;  // raw b.y of the final iterate
  // b.y after dual-feasibility repair; a valid bound on the optimum
  // whenever dual_certified_valid, even on early stop
  double dual_certified = 0.0;
  bool dual_certified_valid = false;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

SdpSolution solve(const SdpProblem& p, const SdpOptions& opt = {});

/// H Hermitian n x n -> [[Re H, -Im H], [Im H, Re H]], symmetric 2n x 2n.
/// Eigenvalues are those of H with doubled multiplicity; traces double.
RMat embed_real(const Mat& h);
/// Inverse of embed_real, averaging the two equivalent copies.
Mat extract_complex(const RMat& e);

/// Append the entries of a dense symmetric matrix on the given block.
void add_dense(std::vector<SparseEntry>& dst, int block, const RMat& m,
               double drop_tol = 0.0);

/// <A, X> for entries against block-diagonal data.
double sparse_inner(const std::vector<SparseEntry>& a,
                    const std::vector<RMat>& x);

struct FeasibilityResult {
  bool feasible = false;
  double t = 0.0;  // smallest witness eigenvalue (interiority margin)
  std::vector<RMat> witness;
  SdpStatus solver_status = SdpStatus::NumericalTrouble;
};

/// Zero-objective solve of the problem's constraints (objective ignored).
/// On convergence the witness is the analytic center, a well-interior
/// starting point; infeasibility is certified through contradictory
/// equalities or an improving ray. A stalled solve leaves the question
/// undecided (feasible = false, solver_status != Optimal/Infeasible).
FeasibilityResult check_feasibility(const SdpProblem& p,
                                    const SdpOptions& opt = {});

/// Appends PSD blocks P, Q of dimension d = m0.rows() and the constraints
///   <entry_maps[idx], X> - (P - Q)_{ij} = m0(i, j)   for i <= j row-major,
///   (1/2) tr[P + Q] <= r,
/// modeling (1/2)||M(X) - m0||_1 <= r for the affine image M defined by
/// entry_maps (one symmetric sparse functional per upper-triangle entry).
void add_trace_norm_ball(
    SdpProblem& p,
    const std::vector<std::vector<SparseEntry>>& entry_maps, const RMat& m0,
    double r);

double dual_objective(const SdpProblem& p, const RVec& y);

/// Projects multipliers onto exact dual feasibility: clamps inequality
/// signs, then shifts an identity-like constraint (or scales y toward 0)
/// until C - sum_k y_k A_k >= 0. Returns nullopt if no valid repair exists.
std::optional<RVec> repair_dual(const SdpProblem& p, const RVec& y);

/// Plain-text round-trippable serialization (row-major entries, %.17g).
std::string dump_problem(const SdpProblem& p);
SdpProblem load_problem(const std::string& text);

}  // namespace bqkd

#endif  // BQKD_SDP_HPP
