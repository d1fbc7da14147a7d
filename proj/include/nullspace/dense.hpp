#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nullspace/rng.hpp"

namespace nullspace {

/// Column-major dense matrix.  Used for Krylov basis blocks, projected
/// matrices and everything else that is small enough to keep dense.
struct DenseBlock {
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  std::vector<double> data;  // column-major, length nrows * ncols

  DenseBlock() = default;
  DenseBlock(std::size_t rows, std::size_t cols)
      : nrows(rows), ncols(cols), data(rows * cols, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[j * nrows + i]; }
  double at(std::size_t i, std::size_t j) const { return data[j * nrows + i]; }

  double* col(std::size_t j) { return data.data() + j * nrows; }
  const double* col(std::size_t j) const { return data.data() + j * nrows; }

  bool empty() const { return nrows == 0 || ncols == 0; }

  static DenseBlock identity(std::size_t n);
  static DenseBlock gaussian(std::size_t rows, std::size_t cols, CounterRng& rng);

  /// Columns [first, first + count) as a fresh block.
  DenseBlock columns(std::size_t first, std::size_t count) const;

  /// Overwrite columns starting at `first` with the columns of `src`.
  void set_columns(std::size_t first, const DenseBlock& src);

  /// Append the columns of `src` on the right (row counts must match).
  void append_columns(const DenseBlock& src);
};

// ---------------------------------------------------------------------------
// Basic dense algebra
// ---------------------------------------------------------------------------

DenseBlock multiply(const DenseBlock& a, const DenseBlock& b);            // A * B
DenseBlock transpose_multiply(const DenseBlock& a, const DenseBlock& b);  // A^T * B
DenseBlock transpose(const DenseBlock& a);

/// y += alpha * x, shape-checked.
void add_scaled(DenseBlock& y, double alpha, const DenseBlock& x);

double frobenius_norm(const DenseBlock& a);
double max_abs(const DenseBlock& a);

/// Largest singular value (exact, via the Gram eigenvalue route).
double spectral_norm(const DenseBlock& a);

/// max_ij |(A^T A - I)_ij|; orthonormality defect of the columns of A.
double orthonormality_defect(const DenseBlock& a);

// ---------------------------------------------------------------------------
// Factorizations
// ---------------------------------------------------------------------------

struct QRResult {
  DenseBlock q;  // orthonormal columns
  DenseBlock r;  // upper triangular, ncols x ncols
  std::vector<std::size_t> replaced_columns;
};

/// Two-pass block Gram-Schmidt QR.  When `against` is nonempty, the columns of
/// X are first orthogonalized (twice) against it; the corresponding
/// coefficients are discarded.  A column whose post-projection norm drops
/// below nrows * eps * (original norm + 1) is declared dependent, replaced by
/// a fresh seeded random direction, and its column of R is zeroed.
QRResult block_qr(const DenseBlock& x, const DenseBlock& against = DenseBlock(),
                  std::uint64_t seed = 0);

struct EigResult {
  std::vector<double> eigenvalues;  // ascending
  DenseBlock eigenvectors;          // orthonormal columns, same order
};

/// Full symmetric eigendecomposition: Householder tridiagonalization followed
/// by implicit-shift QL.  The input is symmetrized by averaging first.
EigResult sym_eig(const DenseBlock& t);

/// Eigenvalues only (no accumulation of transformations); ascending.
std::vector<double> sym_eigvals(const DenseBlock& t);

struct SvdResult {
  DenseBlock u;                     // p x k, orthonormal columns
  std::vector<double> singular_values;  // descending, length k = min(p, q)
  DenseBlock v;                     // q x k, orthonormal columns
};

/// Thin SVD via one-sided Jacobi, M = U diag(s) V^T.
SvdResult thin_svd(const DenseBlock& m);

/// Moore-Penrose pseudo-inverse with relative rank cutoff.
DenseBlock pseudo_inverse(const DenseBlock& m, double rel_tol = 1e-13);

// ---------------------------------------------------------------------------
// Chebyshev and subspace angles
// ---------------------------------------------------------------------------

/// Chebyshev polynomial of the first kind, valid on the whole real line; for
/// x >= 1 this evaluates ((x + sqrt(x^2-1))^k + (x + sqrt(x^2-1))^-k) / 2.
double chebyshev_eval(std::size_t k, double x);

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal blocks.  Throws if either input fails the 1e-10 orthonormality
/// check.
std::vector<double> principal_angles(const DenseBlock& v0, const DenseBlock& v1);

/// tan of the k1-th (largest) principal angle between span(v0) and span(omega):
/// || Vperp^T Omega (V0^T Omega)^+ ||.  Requires [v0, vperp] orthonormal square
/// and V0^T Omega of full column rank; throws otherwise.
double tan_angle(const DenseBlock& v0, const DenseBlock& vperp, const DenseBlock& omega);

}  // namespace nullspace
