#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nullspace/dense.hpp"
#include "nullspace/sparse.hpp"

namespace nullspace {

enum class SolveMode { gram, spsd };
enum class PrecondKind { none, inner, outer };

struct SolverConfig {
  double epsilon = 1e-3;
  std::size_t block_size = 0;  // 0: max(1, dim_k / 16)
  std::size_t dim_k = 64;      // max Krylov dimension before restart
  double residual_tol = 1e-4;  // stop threshold on ||A V||
  std::size_t max_restarts = 300;
  std::uint64_t seed = 1;
  SolveMode mode = SolveMode::gram;
  PrecondKind precond = PrecondKind::none;
  double ict_droptol = 1e-3;
  double ict_diagcomp = 0.1;
  bool deterministic = true;        // pin block kernels to one thread
  bool collect_diagnostics = true;  // track basis orthogonality per cycle
};

struct RestartRecord {
  std::size_t restart_index = 0;
  std::size_t krylov_dim = 0;
  std::size_t matvecs_cumulative = 0;
  std::size_t n_converged = 0;
  double lambda_smallest_unconverged = 0.0;
  double residual_av = 0.0;
};

struct NullspaceResult {
  DenseBlock basis;  // n x nullity, orthonormal
  std::size_t nullity = 0;
  bool converged = false;
  double residual_av = 0.0;   // ||A V||
  double residual_vav = 0.0;  // ||V^T A V|| (SPSD) or ||V^T A^T A V|| (Gram)
  std::vector<double> ritz_values;  // spectrum of the final projected matrix
  std::vector<RestartRecord> history;
  std::size_t matvecs = 0;
  std::size_t restarts = 0;
  double max_ortho_error = 0.0;  // max ||Z^T Z - I||_max seen (diagnostics)
  std::size_t reorth_events = 0;
};

/// Randomized small-block Lanczos null-space solve with restarting and
/// partial reorthogonalization.  Gram mode needs nrows >= ncols; SPSD mode
/// needs a symmetric matrix.  On non-convergence the best available basis is
/// returned with `converged == false`.
NullspaceResult solve(const SparseMatrix& a, const SolverConfig& config);

/// Number of Ritz values below 3 * epsilon (input must be ascending).
std::size_t detect_converged_count(const std::vector<double>& ritz_values, double epsilon);

/// True when the converged count is unchanged across the last two restart
/// cycles and the residual is at or below the configured tolerance.
bool stopping_rule(const std::vector<RestartRecord>& history, double residual_av,
                   const SolverConfig& config);

/// (||A V||, ||V^T A V|| or Gram analogue) for an orthonormal V.
std::pair<double, double> residual_norms(const SparseMatrix& a, const DenseBlock& v,
                                         SolveMode mode);

}  // namespace nullspace
