#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nullspace/dense.hpp"
#include "nullspace/sparse.hpp"

namespace nullspace {

// ---------------------------------------------------------------------------
// Eigenvalue repulsion
// ---------------------------------------------------------------------------

struct RepulsionReport {
  std::size_t trials = 0;
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t nullity = 0;
  std::vector<double> min_gaps;  // one per trial
  std::vector<std::pair<double, double>> quantiles;  // (delta, empirical quantile)
};

/// For each trial draw a fresh uniform diagonal D, form B = A^T A + eps D
/// densely, and record the smallest gap among the N perturbed-zero
/// eigenvalues.  Requires nullity >= 2 and dense-eigendecomposition scale.
RepulsionReport repulsion_experiment(const SparseMatrix& a, double epsilon, std::size_t trials,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Vandermonde ratio (Krylov capture bound)
// ---------------------------------------------------------------------------

/// || Van_perp Van_N^+ || for the Vandermonde matrices built from an
/// ascending spectrum whose first `nullity` values are strictly increasing.
double vandermonde_ratio(const std::vector<double>& eigenvalues, std::size_t nullity,
                         std::size_t t);

/// The matching bound sqrt(n - N) / (t-1)! * (2 / gap)^(t-1), with the
/// relative gap min_i (lambda_{i+1} - lambda_i) / (lambda_n - lambda_1).
double vandermonde_bound(const std::vector<double>& eigenvalues, std::size_t nullity,
                         std::size_t t);

// ---------------------------------------------------------------------------
// Krylov principal-angle decay
// ---------------------------------------------------------------------------

struct AngleTrace {
  std::size_t t = 0;
  std::size_t ell_first = 0;           // = t
  std::vector<double> tan_angles;      // tan angle_t(V_N, K_ell), ell = t, t+1, ...
  std::vector<double> bound_ratios;    // 1 / cheb_{ell-t}(1 + 2 gap ratio)
};

/// Track tan angle_t between the invariant subspace of the N smallest
/// eigenvalues of a dense symmetric B and the growing single-vector Krylov
/// space of omega.  The trace truncates if the Krylov basis collapses.
AngleTrace krylov_angle_trace(const DenseBlock& b_dense, const DenseBlock& omega,
                              std::size_t nullity, std::size_t t, std::size_t ell_max);

/// Orthonormal basis of the single-vector (or block) Krylov space
/// span{omega, B omega, ...} with ell columns, fully reorthogonalized;
/// truncated at rank collapse.  Harness machinery, independent of the
/// production Lanczos path.
DenseBlock dense_krylov_basis(const DenseBlock& b, const DenseBlock& omega, std::size_t ell);

// ---------------------------------------------------------------------------
// Residual bound suite
// ---------------------------------------------------------------------------

struct BoundCheck {
  std::string context;
  double quantity = 0.0;
  double bound = 0.0;
  bool satisfied = false;   // quantity <= bound
  bool applicable = false;  // the check's hypothesis held
};

/// Assertable forms of the attainability and quasi-optimality bounds for a
/// Gram-mode solve: the exact invariant-subspace residual bound (strong and
/// weak form), the Rayleigh-Ritz quasi-optimality bound on an internally
/// built Krylov space, the angle-conditioned refinement, and the end-to-end
/// O(eps^2) form evaluated on the caller's basis `v`.  `sigma_min_nonzero`
/// is the smallest nonzero singular value of A (known for synthetic
/// problems); `seed` fixes the diagonal perturbation and the Krylov start.
std::vector<BoundCheck> residual_bound_suite(const SparseMatrix& a, const DenseBlock& v,
                                             double epsilon, double sigma_min_nonzero,
                                             std::uint64_t seed, std::size_t krylov_steps = 0);

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

void write_repulsion_csv(std::ostream& out, const RepulsionReport& report);
void write_angle_trace_csv(std::ostream& out, const AngleTrace& trace);
void write_bound_checks_csv(std::ostream& out, const std::vector<BoundCheck>& checks);

}  // namespace nullspace
