#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "nullspace/sparse.hpp"

namespace nullspace {

struct ICTFactor;

enum class OperatorMode {
  gram,        // A^T A x + eps D x
  spsd,        // A x + eps D x          (A symmetric positive semi-definite)
  gram_inner,  // A^T P_L^{-1} A x + eps D x
  gram_outer,  // P_R^{-1} A^T A P_R^{-T} x + eps D x
  spsd_outer,  // P^{-1} A P^{-T} x + eps D x
};

/// The perturbed operator B the Lanczos iteration runs on.  The diagonal
/// perturbation D is sampled uniformly on [0,1] once at construction from the
/// given seed and stays fixed for the operator's lifetime.
class PerturbedOperator {
 public:
  PerturbedOperator(OperatorMode mode, SparseMatrix matrix, double epsilon, std::uint64_t seed,
                    std::shared_ptr<const ICTFactor> precond = nullptr);

  DenseBlock apply(const DenseBlock& x) const;

  std::size_t dim() const { return dim_; }
  OperatorMode mode() const { return mode_; }
  double epsilon() const { return epsilon_; }
  std::uint64_t seed() const { return seed_; }
  const SparseMatrix& matrix() const { return matrix_; }
  const std::vector<double>& diag_d() const { return diag_d_; }
  const std::shared_ptr<const ICTFactor>& precond() const { return precond_; }

  /// True for outer preconditioning, where the computed basis spans the null
  /// space of A P^{-T} and must be mapped back through P^{-T}.
  bool needs_outer_postprocess() const;

  /// P^{-T} v (outer modes only; identity otherwise).
  DenseBlock outer_postprocess(const DenseBlock& v) const;

  /// Dense n x n realization of B (test and analysis scale only).
  DenseBlock to_dense_operator() const;

 private:
  OperatorMode mode_;
  SparseMatrix matrix_;
  double epsilon_;
  std::uint64_t seed_;
  std::size_t dim_;
  std::vector<double> diag_d_;
  std::shared_ptr<const ICTFactor> precond_;
};

/// Rayleigh-quotient power iteration estimate of ||B||; never exceeds the true
/// norm.  Used to scale round-off tolerances.
double operator_norm_estimate(const PerturbedOperator& b, std::size_t iters, std::uint64_t seed);

}  // namespace nullspace
