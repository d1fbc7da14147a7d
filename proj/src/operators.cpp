#include "nullspace/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "nullspace/precond.hpp"
#include "nullspace/rng.hpp"

namespace nullspace {

namespace {

// Stream tags so D and other draws from the same seed never collide.
constexpr std::uint64_t kDiagStream = 0xd1a6d1a6;

void add_diag_perturbation(DenseBlock& y, const DenseBlock& x, double epsilon,
                           const std::vector<double>& diag_d) {
  for (std::size_t j = 0; j < x.ncols; ++j) {
    const double* xj = x.col(j);
    double* yj = y.col(j);
    for (std::size_t i = 0; i < x.nrows; ++i) yj[i] += epsilon * diag_d[i] * xj[i];
  }
}

}  // namespace

PerturbedOperator::PerturbedOperator(OperatorMode mode, SparseMatrix matrix, double epsilon,
                                     std::uint64_t seed,
                                     std::shared_ptr<const ICTFactor> precond)
    : mode_(mode),
      matrix_(std::move(matrix)),
      epsilon_(epsilon),
      seed_(seed),
      dim_(matrix_.ncols),
      precond_(std::move(precond)) {
  if (epsilon_ < 0.0) throw std::invalid_argument("PerturbedOperator: epsilon must be nonnegative");
  if (mode_ == OperatorMode::spsd || mode_ == OperatorMode::spsd_outer) {
    if (matrix_.nrows != matrix_.ncols)
      throw std::invalid_argument("PerturbedOperator: SPSD mode requires a square matrix");
  }
  const bool preconditioned = mode_ == OperatorMode::gram_inner ||
                              mode_ == OperatorMode::gram_outer ||
                              mode_ == OperatorMode::spsd_outer;
  if (preconditioned && !precond_)
    throw std::invalid_argument("PerturbedOperator: preconditioned mode without a factor");
  if (mode_ == OperatorMode::gram_inner && precond_->dim() != matrix_.nrows)
    throw std::invalid_argument("PerturbedOperator: inner factor dimension mismatch");
  if ((mode_ == OperatorMode::gram_outer || mode_ == OperatorMode::spsd_outer) &&
      precond_->dim() != matrix_.ncols)
    throw std::invalid_argument("PerturbedOperator: outer factor dimension mismatch");

  CounterRng rng(seed_, kDiagStream);
  diag_d_.resize(dim_);
  for (double& v : diag_d_) v = rng.uniform();
}

DenseBlock PerturbedOperator::apply(const DenseBlock& x) const {
  if (x.nrows != dim_) throw std::invalid_argument("PerturbedOperator::apply: dimension mismatch");
  DenseBlock y;
  switch (mode_) {
    case OperatorMode::gram:
      y = spmv_transpose_block(matrix_, spmv_block(matrix_, x));
      break;
    case OperatorMode::spsd:
      y = spmv_block(matrix_, x);
      break;
    case OperatorMode::gram_inner: {
      DenseBlock t = spmv_block(matrix_, x);
      t = solve_lower(*precond_, t);
      t = solve_upper(*precond_, t);
      y = spmv_transpose_block(matrix_, t);
      break;
    }
    case OperatorMode::gram_outer: {
      DenseBlock t = solve_upper(*precond_, x);
      t = spmv_block(matrix_, t);
      t = spmv_transpose_block(matrix_, t);
      y = solve_lower(*precond_, t);
      break;
    }
    case OperatorMode::spsd_outer: {
      DenseBlock t = solve_upper(*precond_, x);
      t = spmv_block(matrix_, t);
      y = solve_lower(*precond_, t);
      break;
    }
  }
  add_diag_perturbation(y, x, epsilon_, diag_d_);
  return y;
}

bool PerturbedOperator::needs_outer_postprocess() const {
  return mode_ == OperatorMode::gram_outer || mode_ == OperatorMode::spsd_outer;
}

DenseBlock PerturbedOperator::outer_postprocess(const DenseBlock& v) const {
  if (!needs_outer_postprocess()) return v;
  return solve_upper(*precond_, v);
}

DenseBlock PerturbedOperator::to_dense_operator() const {
  return apply(DenseBlock::identity(dim_));
}

double operator_norm_estimate(const PerturbedOperator& b, std::size_t iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("operator_norm_estimate: iters must be >= 1");
  CounterRng rng(seed, 0x9072e57a);
  DenseBlock v = DenseBlock::gaussian(b.dim(), 1, rng);

  double estimate = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const DenseBlock w = b.apply(v);
    double wnorm = 0.0;
    double rayleigh = 0.0;
    double vnorm2 = 0.0;
    for (std::size_t i = 0; i < b.dim(); ++i) {
      wnorm += w.data[i] * w.data[i];
      rayleigh += w.data[i] * v.data[i];
      vnorm2 += v.data[i] * v.data[i];
    }
    wnorm = std::sqrt(wnorm);
    if (wnorm == 0.0 || vnorm2 == 0.0) return 0.0;
    estimate = rayleigh / vnorm2;
    for (std::size_t i = 0; i < b.dim(); ++i) v.data[i] = w.data[i] / wnorm;
  }
  return std::max(estimate, 0.0);
}

}  // namespace nullspace
