#pragma once

#include <cstdint>
#include <memory>

#include "nullspace/operators.hpp"
#include "nullspace/sparse.hpp"

namespace nullspace {

/// Incomplete Cholesky factor with drop tolerance and diagonal compensation:
/// L L^T approximates A + diagcomp * diag(diag(A)).
struct ICTFactor {
  SparseMatrix l;  // lower triangular, full positive diagonal, rows sorted
  double droptol = 0.0;
  double diagcomp = 0.0;
  std::size_t pivot_repairs = 0;

  std::size_t dim() const { return l.nrows; }
};

/// Left-looking incomplete Cholesky of A~ = A + diagcomp * diag(diag(A)).
/// A computed entry l_ij is dropped when |l_ij| < droptol * ||A~(:,j)||_1; a
/// nonpositive pivot is repaired to sqrt(droptol * A~_jj + eps) and counted.
/// The input must be square with symmetric pattern and positive diagonal.
ICTFactor ict_factorize(const SparseMatrix& a, double droptol, double diagcomp);

/// Forward substitution, L X' = X, column by column.
DenseBlock solve_lower(const ICTFactor& f, const DenseBlock& x);

/// Backward substitution, L^T X' = X.
DenseBlock solve_upper(const ICTFactor& f, const DenseBlock& x);

/// Outer-preconditioned Gram operator B = P^{-1} A^T A P^{-T} + eps D with
/// P = factor->l; factor dimension must equal A's column count.
PerturbedOperator wrap_outer(SparseMatrix a, std::shared_ptr<const ICTFactor> factor,
                             double epsilon, std::uint64_t seed);

/// SPSD analogue B = P^{-1} A P^{-T} + eps D for a symmetric A.
PerturbedOperator wrap_outer_spsd(SparseMatrix a, std::shared_ptr<const ICTFactor> factor,
                                  double epsilon, std::uint64_t seed);

/// Inner-preconditioned Gram operator B = A^T P_L^{-1} A + eps D where P_L
/// approximates A A^T; factor dimension must equal A's row count.
PerturbedOperator wrap_inner(SparseMatrix a, std::shared_ptr<const ICTFactor> factor_m,
                             double epsilon, std::uint64_t seed);

}  // namespace nullspace
