#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nullspace/dense.hpp"
#include "nullspace/operators.hpp"

namespace nullspace {

/// State of the block Lanczos recurrence B Z_l = Z_l T_l + Q_{l+1} E_{l+1}.
///
/// z_basis holds the committed blocks [Z_{ell0} | Q_{ell0+1} | ... | Q_l]
/// (retained Ritz vectors first), q_next is the pending residual block
/// Q_{l+1}.  alphas[i] and betas[i] are the coefficients of block
/// ell0 + 1 + i; theta and f_coupling carry the restart head of T.
struct LanczosState {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t ell0 = 0;             // retained block count after last restart
  std::vector<double> theta;        // retained Ritz values (ell0 * d)
  DenseBlock f_coupling;            // (ell0 * d) x d
  DenseBlock z_basis;               // n x (blocks() * d)
  DenseBlock q_next;                // n x d, empty right after a restart
  std::vector<DenseBlock> alphas;   // d x d symmetric
  std::vector<DenseBlock> betas;    // d x d upper triangular (QR factors)
  std::size_t matvecs = 0;          // vectors pushed through the operator
  std::size_t replaced_directions = 0;  // breakdown replacements so far
  std::uint64_t seed = 0;           // breakdown replacement stream

  std::size_t blocks() const { return d == 0 ? 0 : z_basis.ncols / d; }
  std::size_t basis_cols() const { return z_basis.ncols; }

  /// Copy of committed block k (0-based).
  DenseBlock block(std::size_t k) const { return z_basis.columns(k * d, d); }
};

/// Orthogonality-loss monitor: a running two-column window of the strictly
/// upper triangular bound matrix W of the partial-reorthogonalization
/// recurrence, plus the cached block norms the recurrence consumes.
struct OrthoMonitor {
  double eps_d = 0.0;    // d sqrt(n) u ||B||
  double eps_ro = 0.0;   // sqrt(u)
  double norm_b = 0.0;   // scale for the Gamma^{-1} floor
  bool full_reorth = false;

  std::vector<double> theta_norms;  // ||Theta_k||, one per retained block
  std::vector<double> f_norms;      // ||F_k||, one per retained block
  std::vector<double> alpha_norms;  // ||alpha_j|| for the new blocks
  std::vector<double> beta_norms;   // ||beta_j||
  double gamma_inv_norm = 0.0;      // ||beta_l^{-1}||, floored at u ||B||
  bool gamma_singular = false;      // floor was hit; reorthogonalization forced

  // w_col_prev = column l, w_col_prevprev = column l-1 of W (1-based block
  // row index k maps to element k-1).
  std::vector<double> w_col_prev;
  std::vector<double> w_col_prevprev;

  std::size_t reorth_events = 0;
};

OrthoMonitor make_monitor(double norm_b, std::size_t n, std::size_t d, bool full_reorth = false);

/// Orthonormalize Omega into Q_1 and return a fresh state (ell0 = 0).
LanczosState init_lanczos(const PerturbedOperator& b, const DenseBlock& omega);

/// First step after a restart (or after init): computes alpha_{ell0+1} and
/// the residual block Q_{ell0+2} with full orthogonalization against the
/// entire basis, and seeds the monitor's two W columns with eps_d.
void restart_reseed(LanczosState& state, const PerturbedOperator& b, OrthoMonitor& monitor);

/// One three-term-recurrence step: commits Q_l = q_next, computes alpha_l,
/// beta_l and the next residual block, updates the W column and triggers
/// reorthogonalization when the bound crosses eps_ro.
void lanczos_step(LanczosState& state, const PerturbedOperator& b, OrthoMonitor& monitor);

/// The W-recurrence for column l+1 (entries k = 1..l, 1-based).  Exposed for
/// direct testing against an independent transcription; `ell` is the current
/// block count.  Returns the column and whether any entry exceeds eps_ro.
std::pair<std::vector<double>, bool> update_w_column(const OrthoMonitor& monitor,
                                                     std::size_t ell, std::size_t ell0);

/// Reorthogonalize Q_l and Q_{l+1} against Z_{l-1}, recompute alpha_l and
/// beta_l from a fresh operator application, and reset the two active W
/// columns to eps_d.
void reorthogonalize(LanczosState& state, const PerturbedOperator& b, OrthoMonitor& monitor);

/// Dense symmetric realization of the block tridiagonal T_l.
DenseBlock assemble_t(const LanczosState& state);

/// Krylov-Schur style restart keeping the `keep` smallest Ritz pairs (keep
/// must be a positive multiple of d, at most the basis size).  Afterwards the
/// caller must run restart_reseed before stepping again.
void restart(LanczosState& state, const PerturbedOperator& b, std::size_t keep);

/// max |(W^T W - I)_ij| over the stored basis including the residual block.
double basis_orthonormality_defect(const LanczosState& state);

}  // namespace nullspace
