#include "nullspace/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nullspace {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void symmetrize(DenseBlock& a) {
  for (std::size_t j = 0; j < a.ncols; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double v = 0.5 * (a.at(i, j) + a.at(j, i));
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
}

// ||beta^{-1}|| with the u*||B|| floor; flags when the floor was hit.
std::pair<double, bool> gamma_inverse_norm(const DenseBlock& beta, double norm_b) {
  const SvdResult svd = thin_svd(beta);
  const double smin = svd.singular_values.empty() ? 0.0 : svd.singular_values.back();
  const double floor = kEps * std::max(norm_b, 1e-300);
  if (smin <= floor) return {1.0 / floor, true};
  return {1.0 / smin, false};
}

void cache_step_norms(OrthoMonitor& monitor, const DenseBlock& alpha, const DenseBlock& beta) {
  monitor.alpha_norms.push_back(spectral_norm(alpha));
  monitor.beta_norms.push_back(spectral_norm(beta));
  const auto [ginv, singular] = gamma_inverse_norm(beta, monitor.norm_b);
  monitor.gamma_inv_norm = ginv;
  monitor.gamma_singular = singular;
}

std::uint64_t step_seed(const LanczosState& state) {
  return state.seed + 0x9e3779b9ULL * (state.blocks() + 1);
}

}  // namespace

OrthoMonitor make_monitor(double norm_b, std::size_t n, std::size_t d, bool full_reorth) {
  OrthoMonitor m;
  m.norm_b = norm_b;
  m.eps_d = static_cast<double>(d) * std::sqrt(static_cast<double>(n)) * kEps * norm_b;
  m.eps_ro = std::sqrt(kEps);
  m.full_reorth = full_reorth;
  return m;
}

LanczosState init_lanczos(const PerturbedOperator& b, const DenseBlock& omega) {
  if (omega.nrows != b.dim()) throw std::invalid_argument("init_lanczos: Omega row mismatch");
  if (omega.ncols == 0 || omega.ncols > omega.nrows)
    throw std::invalid_argument("init_lanczos: invalid block size");

  LanczosState state;
  state.n = b.dim();
  state.d = omega.ncols;
  state.seed = b.seed() ^ 0x6b8b4567327b23c6ULL;
  state.z_basis = block_qr(omega, DenseBlock(), state.seed).q;
  state.f_coupling = DenseBlock(0, state.d);
  return state;
}

void restart_reseed(LanczosState& state, const PerturbedOperator& b, OrthoMonitor& monitor) {
  if (!state.q_next.empty() || !state.alphas.empty())
    throw std::logic_error("restart_reseed: state already seeded");

  const std::size_t d = state.d;
  const DenseBlock qc = state.block(state.blocks() - 1);

  DenseBlock w = b.apply(qc);
  state.matvecs += d;
  DenseBlock alpha = transpose_multiply(qc, w);
  symmetrize(alpha);

  // Full orthogonalization against everything retained, per the restart
  // bookkeeping; the discarded coefficients are F and alpha.
  QRResult qr = block_qr(w, state.z_basis, step_seed(state));
  state.replaced_directions += qr.replaced_columns.size();
  state.alphas.push_back(std::move(alpha));
  state.betas.push_back(qr.r);
  state.q_next = std::move(qr.q);

  // Monitor caches for the retained head: per-block Ritz magnitudes and the
  // d x d row blocks of F.
  monitor.theta_norms.assign(state.ell0, 0.0);
  monitor.f_norms.assign(state.ell0, 0.0);
  for (std::size_t k = 0; k < state.ell0; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < d; ++i) m = std::max(m, std::abs(state.theta[k * d + i]));
    monitor.theta_norms[k] = m;
    DenseBlock fk(d, d);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < d; ++i) fk.at(i, j) = state.f_coupling.at(k * d + i, j);
    monitor.f_norms[k] = spectral_norm(fk);
  }
  monitor.alpha_norms.clear();
  monitor.beta_norms.clear();
  cache_step_norms(monitor, state.alphas.back(), state.betas.back());

  // Columns ell0+1 and ell0+2 of W start at eps_d: both blocks were just
  // orthogonalized against the whole retained basis.
  monitor.w_col_prevprev.assign(state.ell0, monitor.eps_d);
  monitor.w_col_prev.assign(state.ell0 + 1, monitor.eps_d);
}

std::pair<std::vector<double>, bool> update_w_column(const OrthoMonitor& monitor,
                                                     std::size_t ell, std::size_t ell0) {
  if (ell < ell0 + 2) throw std::logic_error("update_w_column: needs two post-restart columns");

  const double eps_d = monitor.eps_d;
  // w(i, j) lookup against the stored columns j = ell and j = ell - 1.
  // Conventions for indices the printed recurrence reaches beyond the stored
  // strictly-upper triangle: diagonal entries are 0, transposed references
  // use symmetry, and the not-yet-computed w_{l+1,l} counts as eps_d.
  const auto w_at = [&](std::size_t k, std::size_t j) -> double {
    if (k == j) return 0.0;
    if (k > j) std::swap(k, j);
    if (j == ell)
      return k - 1 < monitor.w_col_prev.size() ? monitor.w_col_prev[k - 1] : eps_d;
    if (j == ell - 1)
      return k - 1 < monitor.w_col_prevprev.size() ? monitor.w_col_prevprev[k - 1] : eps_d;
    if (j == ell + 1) return eps_d;  // the column being computed (via w_{l+1,l})
    return eps_d;
  };

  const auto alpha_norm = [&](std::size_t k) { return monitor.alpha_norms[k - ell0 - 1]; };
  const auto beta_norm = [&](std::size_t k) { return monitor.beta_norms[k - ell0 - 1]; };

  const double ginv = monitor.gamma_inv_norm;
  const double a_ell = alpha_norm(ell);
  const double b_ellm1 = beta_norm(ell - 1);

  std::vector<double> col(ell, 0.0);
  bool trigger = monitor.gamma_singular;
  for (std::size_t k = 1; k <= ell; ++k) {
    double v = 0.0;
    if (k <= ell0) {
      // Transcribed as printed: the first two weights reference rows ell0+1
      // and ell0 rather than k.
      v = ginv * (w_at(ell0 + 1, ell) * (monitor.theta_norms[k - 1] + a_ell) +
                  (ell0 >= 1 ? w_at(ell0, ell) : 0.0) * monitor.f_norms[k - 1] +
                  w_at(k, ell - 1) * b_ellm1 + 2.0 * eps_d);
    } else if (k == ell0 + 1) {
      double f_sum = 0.0;
      for (std::size_t i = 1; i <= ell0; ++i) f_sum += w_at(i, ell) * monitor.f_norms[i - 1];
      v = ginv * (w_at(k, ell) * (alpha_norm(k) + a_ell) + f_sum +
                  w_at(k + 1, ell) * beta_norm(k) + w_at(k, ell - 1) * b_ellm1 + 2.0 * eps_d);
    } else {
      v = ginv * (w_at(k, ell) * (alpha_norm(k) + a_ell) + w_at(k + 1, ell) * beta_norm(k) +
                  w_at(k - 1, ell) * beta_norm(k - 1) + w_at(k, ell - 1) * b_ellm1 +
                  2.0 * eps_d);
    }
    col[k - 1] = v;
    if (v > monitor.eps_ro) trigger = true;
  }
  return {std::move(col), trigger};
}

void reorthogonalize(LanczosState& state, const PerturbedOperator& b, OrthoMonitor& monitor) {
  const std::size_t d = state.d;
  const std::size_t ell = state.blocks();
  if (ell < 2 || state.betas.size() < 2)
    throw std::logic_error("reorthogonalize: no three-term step to refresh");

  const DenseBlock z_head = state.z_basis.columns(0, (ell - 1) * d);

  // Refresh Q_l against Z_{l-1}.
  DenseBlock ql = state.block(ell - 1);
  ql = block_qr(ql, z_head, step_seed(state) ^ 0x4e0).q;
  state.z_basis.set_columns((ell - 1) * d, ql);

  // Recompute the step coefficients from a fresh application so the Lanczos
  // decomposition stays tight after the basis was touched.
  DenseBlock w = b.apply(ql);
  state.matvecs += d;
  {
    const DenseBlock qlm1 = state.block(ell - 2);
    const DenseBlock correction = multiply(qlm1, transpose(state.betas[state.betas.size() - 2]));
    add_scaled(w, -1.0, correction);
  }
  DenseBlock alpha = transpose_multiply(ql, w);
  symmetrize(alpha);
  add_scaled(w, -1.0, multiply(ql, alpha));

  QRResult qr = block_qr(w, state.z_basis, step_seed(state) ^ 0x5e0);
  state.alphas.back() = std::move(alpha);
  state.betas.back() = qr.r;
  state.q_next = std::move(qr.q);

  monitor.alpha_norms.back() = spectral_norm(state.alphas.back());
  monitor.beta_norms.back() = spectral_norm(state.betas.back());
  const auto [ginv, singular] = gamma_inverse_norm(state.betas.back(), monitor.norm_b);
  monitor.gamma_inv_norm = ginv;
  monitor.gamma_singular = singular;

  monitor.w_col_prev.assign(ell - 1, monitor.eps_d);
  ++monitor.reorth_events;
}

void lanczos_step(LanczosState& state, const PerturbedOperator& b, OrthoMonitor& monitor) {
  if (state.q_next.empty() || state.alphas.empty())
    throw std::logic_error("lanczos_step: run restart_reseed first");

  const std::size_t d = state.d;

  // Commit Q_l.
  const DenseBlock ql = state.q_next;
  state.z_basis.append_columns(ql);
  state.q_next = DenseBlock();
  const std::size_t ell = state.blocks();

  DenseBlock w = b.apply(ql);
  state.matvecs += d;
  const DenseBlock qlm1 = state.block(ell - 2);
  add_scaled(w, -1.0, multiply(qlm1, transpose(state.betas.back())));

  DenseBlock alpha = transpose_multiply(ql, w);
  symmetrize(alpha);
  add_scaled(w, -1.0, multiply(ql, alpha));

  if (state.basis_cols() == state.n) {
    // Krylov space exhausted: the basis spans the whole space, the residual
    // is round-off, and the decomposition terminates with beta = 0.
    state.alphas.push_back(std::move(alpha));
    state.betas.push_back(DenseBlock(d, d));
    cache_step_norms(monitor, state.alphas.back(), state.betas.back());
    monitor.w_col_prevprev = std::move(monitor.w_col_prev);
    monitor.w_col_prev.assign(state.blocks(), monitor.eps_d);
    return;
  }

  DenseBlock against;
  if (monitor.full_reorth) {
    against = state.z_basis;
  } else {
    against = DenseBlock(state.n, 0);
    against.append_columns(qlm1);
    against.append_columns(ql);
  }
  QRResult qr = block_qr(w, against, step_seed(state));
  state.replaced_directions += qr.replaced_columns.size();

  state.alphas.push_back(std::move(alpha));
  state.betas.push_back(qr.r);
  state.q_next = std::move(qr.q);
  cache_step_norms(monitor, state.alphas.back(), state.betas.back());

  std::vector<double> w_new;
  if (monitor.full_reorth) {
    w_new.assign(ell, monitor.eps_d);
  } else if (!qr.replaced_columns.empty()) {
    // Breakdown: the replacement direction has O(1/sqrt(n)) overlap with the
    // whole basis, so orthogonalize the block against all of Z and absorb the
    // triangular correction into beta.
    QRResult cleanup = block_qr(state.q_next, state.z_basis, step_seed(state) ^ 0xb4ea);
    state.betas.back() = multiply(cleanup.r, state.betas.back());
    state.q_next = std::move(cleanup.q);
    monitor.beta_norms.back() = spectral_norm(state.betas.back());
    w_new.assign(ell, monitor.eps_d);
  } else {
    auto [col, trigger] = update_w_column(monitor, ell, state.ell0);
    w_new = std::move(col);
    if (trigger) {
      reorthogonalize(state, b, monitor);
      w_new.assign(ell, monitor.eps_d);
    }
  }
  monitor.w_col_prevprev = std::move(monitor.w_col_prev);
  monitor.w_col_prev = std::move(w_new);
}

DenseBlock assemble_t(const LanczosState& state) {
  if (state.alphas.empty()) throw std::logic_error("assemble_t: no steps taken");
  const std::size_t d = state.d;
  const std::size_t head = state.ell0 * d;
  const std::size_t dim = state.basis_cols();
  DenseBlock t(dim, dim);

  for (std::size_t i = 0; i < head; ++i) t.at(i, i) = state.theta[i];
  // F couples the retained head to the first new block.
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < head; ++i) {
      t.at(i, head + j) = state.f_coupling.at(i, j);
      t.at(head + j, i) = state.f_coupling.at(i, j);
    }
  for (std::size_t blk = 0; blk < state.alphas.size(); ++blk) {
    const std::size_t off = head + blk * d;
    const DenseBlock& a = state.alphas[blk];
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < d; ++i) t.at(off + i, off + j) = a.at(i, j);
    if (blk + 1 < state.alphas.size()) {
      const DenseBlock& beta = state.betas[blk];
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < d; ++i) {
          t.at(off + i, off + d + j) = beta.at(j, i);  // beta^T above
          t.at(off + d + j, off + i) = beta.at(j, i);
        }
    }
  }
  symmetrize(t);
  return t;
}

void restart(LanczosState& state, const PerturbedOperator& b, std::size_t keep) {
  (void)b;
  if (state.alphas.empty()) throw std::logic_error("restart: no steps taken");
  const std::size_t d = state.d;
  const std::size_t dim = state.basis_cols();
  if (keep == 0 || keep > dim || keep % d != 0)
    throw std::invalid_argument("restart: keep must be a positive multiple of d within the basis");
  if (keep + d > state.n)
    throw std::invalid_argument("restart: keep leaves no room for a residual block");

  const EigResult eig = sym_eig(assemble_t(state));
  const DenseBlock vk = eig.eigenvectors.columns(0, keep);

  DenseBlock z_new = multiply(state.z_basis, vk);

  // E V_Z = beta_l * (bottom d rows of V_Z).
  DenseBlock bottom(d, keep);
  for (std::size_t j = 0; j < keep; ++j)
    for (std::size_t i = 0; i < d; ++i) bottom.at(i, j) = vk.at(dim - d + i, j);
  const DenseBlock g = multiply(state.betas.back(), bottom);

  // Clean up the residual block against the compressed basis; the triangular
  // factor folds into F so the decomposition identity survives.  An exhausted
  // state has no residual block; any fresh orthonormal block works since the
  // coupling is zero.
  DenseBlock q_fresh;
  if (state.q_next.empty()) {
    CounterRng rng(state.seed ^ 0xf4e5, dim);
    q_fresh = block_qr(DenseBlock::gaussian(state.n, d, rng), z_new,
                       step_seed(state) ^ 0xc4e57a37)
                  .q;
    state.f_coupling = DenseBlock(keep, d);
  } else {
    QRResult qr = block_qr(state.q_next, z_new, step_seed(state) ^ 0xc4e57a37);
    state.f_coupling = multiply(transpose(g), transpose(qr.r));
    q_fresh = std::move(qr.q);
  }

  state.theta.assign(eig.eigenvalues.begin(), eig.eigenvalues.begin() + keep);
  z_new.append_columns(q_fresh);
  state.z_basis = std::move(z_new);
  state.q_next = DenseBlock();
  state.alphas.clear();
  state.betas.clear();
  state.ell0 = keep / d;
}

double basis_orthonormality_defect(const LanczosState& state) {
  DenseBlock all = state.z_basis;
  if (!state.q_next.empty()) all.append_columns(state.q_next);
  return orthonormality_defect(all);
}

}  // namespace nullspace
