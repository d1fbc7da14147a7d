#pragma once

#include <cstddef>
#include <tuple>
#include <vector>

#include "nullspace/dense.hpp"

namespace nullspace {

/// Compressed sparse row matrix.  Immutable after construction; rows hold
/// strictly increasing column indices and no explicit zeros or duplicates.
struct SparseMatrix {
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  std::vector<std::size_t> row_offsets;  // length nrows + 1
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  SparseMatrix transposed() const;

  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(const std::vector<double>& d);
};

using Triplet = std::tuple<std::size_t, std::size_t, double>;

/// Build a CSR matrix from (row, col, value) triplets.  Duplicates are summed
/// and entries that cancel to exactly zero are dropped.  Out-of-range indices
/// raise std::invalid_argument.
SparseMatrix csr_from_triplets(const std::vector<Triplet>& entries, std::size_t nrows,
                               std::size_t ncols);

/// Y = A * X with X of shape (ncols x d).  Parallel across block columns; the
/// per-column arithmetic is sequential, so results are bitwise reproducible
/// for any thread count.
DenseBlock spmv_block(const SparseMatrix& a, const DenseBlock& x);

/// Y = A^T * X with X of shape (nrows x d).  CSR rows are traversed and
/// scattered into the output, one block column per task.
DenseBlock spmv_transpose_block(const SparseMatrix& a, const DenseBlock& x);

/// A * B as sparse CSR (used to form A A^T or A^T A for preconditioning).
SparseMatrix sparse_multiply(const SparseMatrix& a, const SparseMatrix& b);

/// Value symmetry check: max |A - A^T| entry <= tol * max |A| entry.
bool is_symmetric(const SparseMatrix& a, double rel_tol = 1e-12);

/// Dense copy (small matrices only; used by oracles and the analysis module).
DenseBlock to_dense(const SparseMatrix& a);

/// Thread budget for block kernels: NULLSPACE_THREADS if set (0 or 1 means
/// strict sequential), otherwise hardware concurrency capped at 8.
std::size_t thread_budget();

/// Process-wide override; `force_sequential(true)` pins all block kernels to
/// one thread regardless of the environment (deterministic mode).
void force_sequential(bool on);

}  // namespace nullspace
