#include "nullspace/precond.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nullspace {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

ICTFactor ict_factorize(const SparseMatrix& a, double droptol, double diagcomp) {
  if (a.nrows != a.ncols) throw std::invalid_argument("ict_factorize: matrix must be square");
  const std::size_t n = a.nrows;

  // Compensated diagonal and column 1-norms.  The pattern is symmetric, so
  // column j of A~ is read from row j.
  std::vector<double> diag(n, 0.0);
  std::vector<double> colnorm1(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      if (a.col_indices[k] == i) diag[i] = a.values[k];
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = a.row_offsets[j]; k < a.row_offsets[j + 1]; ++k) {
      double v = a.values[k];
      if (a.col_indices[k] == j) v += diagcomp * diag[j];
      s += std::abs(v);
    }
    if (diag[j] == 0.0) s += std::abs(diagcomp * diag[j]);  // no stored diagonal
    colnorm1[j] = s;
  }

  ICTFactor out;
  out.droptol = droptol;
  out.diagcomp = diagcomp;

  // cols[j]: finalized strictly-lower entries of column j, ascending rows.
  // row_entries[i]: (k, l_ik) pairs with k < i, filled as columns finalize.
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(n);
  std::vector<std::vector<std::pair<std::size_t, double>>> row_entries(n);
  std::vector<double> l_diag(n, 0.0);

  std::vector<double> work(n, 0.0);
  std::vector<std::size_t> touched;

  for (std::size_t j = 0; j < n; ++j) {
    const double compensated_diag = diag[j] * (1.0 + diagcomp);
    if (compensated_diag <= 0.0)
      throw std::runtime_error("ict_factorize: nonpositive diagonal (structurally singular row)");

    touched.clear();
    // Column j of A~, lower part.
    for (std::size_t k = a.row_offsets[j]; k < a.row_offsets[j + 1]; ++k) {
      const std::size_t i = a.col_indices[k];
      if (i < j) continue;
      work[i] = a.values[k];
      touched.push_back(i);
    }
    if (work[j] == 0.0 && diag[j] != 0.0) touched.push_back(j);
    work[j] = compensated_diag;

    // Left-looking update: subtract l_jk * L(j:n, k) for every k < j with
    // l_jk nonzero.  Column k's diagonal sits at row k < j, so only the
    // strictly-lower entries with row >= j participate.
    for (const auto& [k, ljk] : row_entries[j]) {
      const auto& ck = cols[k];
      auto it = std::lower_bound(ck.begin(), ck.end(), j,
                                 [](const auto& e, std::size_t row) { return e.first < row; });
      for (; it != ck.end(); ++it) {
        if (work[it->first] == 0.0) touched.push_back(it->first);
        work[it->first] -= ljk * it->second;
      }
    }

    double pivot = work[j];
    if (!(pivot > 0.0)) {
      pivot = droptol * compensated_diag + kEps;
      ++out.pivot_repairs;
    }
    const double ljj = std::sqrt(pivot);
    l_diag[j] = ljj;

    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    const double drop_threshold = droptol * colnorm1[j];
    for (std::size_t i : touched) {
      const double w = work[i];
      work[i] = 0.0;
      if (i <= j) continue;
      const double lij = w / ljj;
      if (std::abs(lij) < drop_threshold || lij == 0.0) continue;
      cols[j].emplace_back(i, lij);
      row_entries[i].emplace_back(j, lij);
    }
  }

  // Assemble CSR: row i holds its strictly-lower entries then the diagonal.
  std::vector<Triplet> trips;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [k, v] : row_entries[i]) trips.emplace_back(i, k, v);
    trips.emplace_back(i, i, l_diag[i]);
  }
  out.l = csr_from_triplets(trips, n, n);
  return out;
}

DenseBlock solve_lower(const ICTFactor& f, const DenseBlock& x) {
  const SparseMatrix& l = f.l;
  if (x.nrows != l.nrows) throw std::invalid_argument("solve_lower: dimension mismatch");
  DenseBlock y = x;
  for (std::size_t j = 0; j < x.ncols; ++j) {
    double* yj = y.col(j);
    for (std::size_t i = 0; i < l.nrows; ++i) {
      double s = yj[i];
      const std::size_t end = l.row_offsets[i + 1];
      // Diagonal is the last entry of each row.
      if (end == l.row_offsets[i] || l.col_indices[end - 1] != i || l.values[end - 1] == 0.0)
        throw std::runtime_error("solve_lower: missing or zero diagonal");
      for (std::size_t k = l.row_offsets[i]; k + 1 < end; ++k)
        s -= l.values[k] * yj[l.col_indices[k]];
      yj[i] = s / l.values[end - 1];
    }
  }
  return y;
}

DenseBlock solve_upper(const ICTFactor& f, const DenseBlock& x) {
  const SparseMatrix& l = f.l;
  if (x.nrows != l.nrows) throw std::invalid_argument("solve_upper: dimension mismatch");
  DenseBlock y = x;
  for (std::size_t j = 0; j < x.ncols; ++j) {
    double* yj = y.col(j);
    for (std::size_t i = l.nrows; i-- > 0;) {
      const std::size_t end = l.row_offsets[i + 1];
      if (end == l.row_offsets[i] || l.col_indices[end - 1] != i || l.values[end - 1] == 0.0)
        throw std::runtime_error("solve_upper: missing or zero diagonal");
      const double xi = yj[i] / l.values[end - 1];
      yj[i] = xi;
      for (std::size_t k = l.row_offsets[i]; k + 1 < end; ++k)
        yj[l.col_indices[k]] -= l.values[k] * xi;
    }
  }
  return y;
}

PerturbedOperator wrap_outer(SparseMatrix a, std::shared_ptr<const ICTFactor> factor,
                             double epsilon, std::uint64_t seed) {
  if (!factor || factor->dim() != a.ncols)
    throw std::invalid_argument("wrap_outer: factor dimension must equal column count");
  return PerturbedOperator(OperatorMode::gram_outer, std::move(a), epsilon, seed,
                           std::move(factor));
}

PerturbedOperator wrap_outer_spsd(SparseMatrix a, std::shared_ptr<const ICTFactor> factor,
                                  double epsilon, std::uint64_t seed) {
  if (a.nrows != a.ncols) throw std::invalid_argument("wrap_outer_spsd: matrix must be square");
  if (!factor || factor->dim() != a.ncols)
    throw std::invalid_argument("wrap_outer_spsd: factor dimension must equal matrix size");
  return PerturbedOperator(OperatorMode::spsd_outer, std::move(a), epsilon, seed,
                           std::move(factor));
}

PerturbedOperator wrap_inner(SparseMatrix a, std::shared_ptr<const ICTFactor> factor_m,
                             double epsilon, std::uint64_t seed) {
  if (!factor_m || factor_m->dim() != a.nrows)
    throw std::invalid_argument("wrap_inner: factor dimension must equal row count");
  return PerturbedOperator(OperatorMode::gram_inner, std::move(a), epsilon, seed,
                           std::move(factor_m));
}

}  // namespace nullspace
