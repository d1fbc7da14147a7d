#include "nullspace/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "nullspace/operators.hpp"
#include "nullspace/rng.hpp"

namespace nullspace {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double factorial(std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

void check_strict_head(const std::vector<double>& eigenvalues, std::size_t nullity) {
  if (nullity == 0 || nullity > eigenvalues.size())
    throw std::invalid_argument("spectrum: nullity out of range");
  for (std::size_t i = 0; i + 1 < eigenvalues.size(); ++i)
    if (eigenvalues[i + 1] < eigenvalues[i])
      throw std::invalid_argument("spectrum: eigenvalues must be ascending");
  for (std::size_t i = 0; i + 1 < nullity; ++i)
    if (!(eigenvalues[i + 1] > eigenvalues[i]))
      throw std::invalid_argument("spectrum: leading eigenvalues must be strictly increasing");
}

}  // namespace

// ---------------------------------------------------------------------------
// Repulsion
// ---------------------------------------------------------------------------

RepulsionReport repulsion_experiment(const SparseMatrix& a, double epsilon, std::size_t trials,
                                     std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("repulsion_experiment: trials must be positive");
  const std::size_t n = a.ncols;

  const DenseBlock ad = to_dense(a);
  const DenseBlock gram = transpose_multiply(ad, ad);
  const std::vector<double> base = sym_eigvals(gram);
  std::size_t nullity = 0;
  while (nullity < n && base[nullity] < epsilon) ++nullity;
  if (nullity < 2)
    throw std::invalid_argument("repulsion_experiment: need nullity >= 2 for a gap");

  RepulsionReport report;
  report.trials = trials;
  report.epsilon = epsilon;
  report.n = n;
  report.nullity = nullity;
  report.min_gaps.assign(trials, 0.0);

  // Trials are independent: each owns the generator stream (seed, trial).
  const std::size_t nthreads = std::min(thread_budget(), trials);
  const auto run_trials = [&](std::size_t first, std::size_t stride) {
    DenseBlock b = gram;
    for (std::size_t trial = first; trial < trials; trial += stride) {
      CounterRng rng(seed, trial);
      for (std::size_t i = 0; i < n; ++i) b.at(i, i) = gram.at(i, i) + epsilon * rng.uniform();
      const std::vector<double> evals = sym_eigvals(b);
      double min_gap = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i + 1 < nullity; ++i)
        min_gap = std::min(min_gap, std::abs(evals[i + 1] - evals[i]));
      report.min_gaps[trial] = min_gap;
    }
  };
  if (nthreads <= 1) {
    run_trials(0, 1);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) workers.emplace_back(run_trials, t, nthreads);
    for (auto& w : workers) w.join();
  }

  std::vector<double> sorted = report.min_gaps;
  std::sort(sorted.begin(), sorted.end());
  for (double delta : {0.1, 0.5}) {
    const std::size_t idx =
        std::min(trials - 1, static_cast<std::size_t>(delta * static_cast<double>(trials)));
    report.quantiles.emplace_back(delta, sorted[idx]);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Vandermonde
// ---------------------------------------------------------------------------

double vandermonde_ratio(const std::vector<double>& eigenvalues, std::size_t nullity,
                         std::size_t t) {
  check_strict_head(eigenvalues, nullity);
  if (t == 0 || t > nullity) throw std::invalid_argument("vandermonde_ratio: t out of range");
  const std::size_t n = eigenvalues.size();

  const auto vandermonde = [&](std::size_t first, std::size_t count) {
    DenseBlock v(count, t);
    for (std::size_t i = 0; i < count; ++i) {
      double p = 1.0;
      for (std::size_t j = 0; j < t; ++j) {
        v.at(i, j) = p;
        p *= eigenvalues[first + i];
      }
    }
    return v;
  };

  const DenseBlock van_n = vandermonde(0, nullity);
  const DenseBlock van_perp = vandermonde(nullity, n - nullity);
  return spectral_norm(multiply(van_perp, pseudo_inverse(van_n)));
}

double vandermonde_bound(const std::vector<double>& eigenvalues, std::size_t nullity,
                         std::size_t t) {
  check_strict_head(eigenvalues, nullity);
  if (t == 0 || t > nullity) throw std::invalid_argument("vandermonde_bound: t out of range");
  const std::size_t n = eigenvalues.size();
  const double range = eigenvalues.back() - eigenvalues.front();
  if (!(range > 0.0)) throw std::invalid_argument("vandermonde_bound: degenerate spectrum");

  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < nullity; ++i)
    min_gap = std::min(min_gap, eigenvalues[i + 1] - eigenvalues[i]);
  const double gap = min_gap / range;
  return std::sqrt(static_cast<double>(n - nullity)) / factorial(t - 1) *
         std::pow(2.0 / gap, static_cast<double>(t - 1));
}

// ---------------------------------------------------------------------------
// Krylov angles
// ---------------------------------------------------------------------------

DenseBlock dense_krylov_basis(const DenseBlock& b, const DenseBlock& omega, std::size_t ell) {
  if (b.nrows != b.ncols || omega.nrows != b.nrows)
    throw std::invalid_argument("dense_krylov_basis: shape mismatch");
  const std::size_t n = b.nrows;
  const std::size_t d = omega.ncols;

  DenseBlock basis(n, 0);
  DenseBlock current = omega;
  while (basis.ncols < ell) {
    // Orthogonalize the candidate block column by column; stop at collapse.
    for (std::size_t c = 0; c < d && basis.ncols < ell; ++c) {
      DenseBlock col = current.columns(c, 1);
      const double before = frobenius_norm(col);
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < basis.ncols; ++i) {
          double proj = 0.0;
          for (std::size_t k = 0; k < n; ++k) proj += basis.at(k, i) * col.at(k, 0);
          for (std::size_t k = 0; k < n; ++k) col.at(k, 0) -= proj * basis.at(k, i);
        }
      const double after = frobenius_norm(col);
      if (after <= static_cast<double>(n) * kEps * (before + 1.0)) return basis;  // collapsed
      for (std::size_t k = 0; k < n; ++k) col.at(k, 0) /= after;
      basis.append_columns(col);
    }
    if (basis.ncols == 0) return basis;
    current = multiply(b, basis.columns(basis.ncols - std::min(d, basis.ncols),
                                        std::min(d, basis.ncols)));
  }
  return basis;
}

AngleTrace krylov_angle_trace(const DenseBlock& b_dense, const DenseBlock& omega,
                              std::size_t nullity, std::size_t t, std::size_t ell_max) {
  if (b_dense.nrows != b_dense.ncols)
    throw std::invalid_argument("krylov_angle_trace: B must be square");
  if (t == 0 || t > nullity) throw std::invalid_argument("krylov_angle_trace: t out of range");
  if (ell_max < t) throw std::invalid_argument("krylov_angle_trace: ell_max < t");
  const std::size_t n = b_dense.nrows;
  if (nullity >= n) throw std::invalid_argument("krylov_angle_trace: nullity must be < n");

  const EigResult eig = sym_eig(b_dense);
  for (std::size_t i = 0; i + 1 < nullity + 1; ++i)
    if (!(eig.eigenvalues[i + 1] > eig.eigenvalues[i]))
      throw std::invalid_argument("krylov_angle_trace: N smallest eigenvalues must be distinct");

  const DenseBlock v_n = eig.eigenvectors.columns(0, nullity);
  const DenseBlock v_perp = eig.eigenvectors.columns(nullity, n - nullity);

  const double lam_gap = eig.eigenvalues[nullity] - eig.eigenvalues[nullity - 1];
  const double lam_span =
      std::max(eig.eigenvalues[n - 1] - eig.eigenvalues[nullity], kEps);
  const double cheb_arg = 1.0 + 2.0 * std::max(lam_gap, 0.0) / lam_span;

  const DenseBlock basis = dense_krylov_basis(b_dense, omega, ell_max);

  AngleTrace trace;
  trace.t = t;
  trace.ell_first = t;
  for (std::size_t ell = t; ell <= std::min(ell_max, basis.ncols); ++ell) {
    const DenseBlock k_ell = basis.columns(0, ell);
    const SvdResult svd = thin_svd(transpose_multiply(v_n, k_ell));
    const DenseBlock w_t = svd.v.columns(0, t);
    const DenseBlock omega_t = multiply(k_ell, w_t);
    double tangent = 0.0;
    try {
      tangent = tan_angle(v_n, v_perp, omega_t);
    } catch (const std::runtime_error&) {
      // Angle indistinguishable from pi/2 at this ell.
      tangent = std::numeric_limits<double>::infinity();
    }
    trace.tan_angles.push_back(tangent);
    trace.bound_ratios.push_back(1.0 / chebyshev_eval(ell - t, cheb_arg));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Residual bound suite
// ---------------------------------------------------------------------------

std::vector<BoundCheck> residual_bound_suite(const SparseMatrix& a, const DenseBlock& v,
                                             double epsilon, double sigma_min_nonzero,
                                             std::uint64_t seed, std::size_t krylov_steps) {
  if (v.nrows != a.ncols) throw std::invalid_argument("residual_bound_suite: V row mismatch");
  if (v.ncols == 0) throw std::invalid_argument("residual_bound_suite: V is empty");
  if (orthonormality_defect(v) > 1e-8)
    throw std::invalid_argument("residual_bound_suite: V must be orthonormal");

  const std::size_t n = a.ncols;
  const std::size_t nullity = v.ncols;
  const double s2 = sigma_min_nonzero * sigma_min_nonzero;

  const PerturbedOperator b(OperatorMode::gram, a, epsilon, seed);
  const DenseBlock bd = b.to_dense_operator();
  const EigResult eig = sym_eig(bd);
  const DenseBlock v_exact = eig.eigenvectors.columns(0, nullity);
  const DenseBlock v_perp = eig.eigenvectors.columns(nullity, n - nullity);

  const DenseBlock ad = to_dense(a);
  const double sigma_max = spectral_norm(ad);

  std::vector<BoundCheck> checks;
  const auto push = [&](std::string context, double quantity, double bound, bool applicable) {
    checks.push_back(
        BoundCheck{std::move(context), quantity, bound, quantity <= bound, applicable});
  };

  // Exact invariant subspace of B: strong and weak attainability bounds.
  const double av_exact = spectral_norm(multiply(ad, v_exact));
  const bool half_gap = epsilon < 0.5 * s2;
  push("attainability-strong |A V_N| <= eps (s^2 - eps)^{-1/2}", av_exact,
       half_gap ? epsilon / std::sqrt(s2 - epsilon) : 0.0, half_gap);
  push("attainability-weak |A V_N| <= sqrt(eps)", av_exact, std::sqrt(epsilon), half_gap);

  // Rayleigh-Ritz quasi-optimality on an internally built Krylov space.
  if (krylov_steps == 0) krylov_steps = std::min(n, 3 * nullity + 30);
  krylov_steps = std::max(krylov_steps, nullity + 1);
  CounterRng rng(seed, 0xa27);
  const DenseBlock omega = DenseBlock::gaussian(n, 1, rng);
  const DenseBlock z = dense_krylov_basis(bd, omega, std::min(krylov_steps, n));
  if (z.ncols > nullity) {
    const EigResult ritz = sym_eig(transpose_multiply(z, multiply(bd, z)));
    const DenseBlock v_rr = multiply(z, ritz.eigenvectors.columns(0, nullity));
    const DenseBlock az = multiply(ad, z);
    const std::vector<double> lam0 = sym_eigvals(transpose_multiply(az, az));
    const double lam0_n = lam0[nullity - 1];
    const double av_rr = spectral_norm(multiply(ad, v_rr));

    const bool gap_ok = epsilon < s2 - lam0_n;
    push("rayleigh-ritz |A V|^2 <= lam_N^(0) + eps^2/(s^2 - lam_N^(0) - eps)", av_rr * av_rr,
         gap_ok ? lam0_n + epsilon * epsilon / (s2 - lam0_n - epsilon) : 0.0, gap_ok);

    double tangent = std::numeric_limits<double>::infinity();
    try {
      const SvdResult svd = thin_svd(transpose_multiply(v_exact, z));
      const DenseBlock w_t = svd.v.columns(0, nullity);
      tangent = tan_angle(v_exact, v_perp, multiply(z, w_t));
    } catch (const std::runtime_error&) {
      // Krylov space does not yet resolve the subspace; check stays n/a.
    }
    const bool contan =
        epsilon < s2 / 3.0 &&
        tangent <= (2.0 * s2 - 5.0 * epsilon) / (3.0 * sigma_max * std::sqrt(s2 - epsilon));
    const double refined =
        std::pow(epsilon / std::sqrt(s2 - epsilon) + sigma_max * tangent, 2) +
        9.0 * epsilon * epsilon / (5.0 * (s2 - epsilon));
    push("angle-refined |A V|^2 <= (eps/sqrt(s^2-eps) + s_max tan)^2 + 9eps^2/(5(s^2-eps))",
         av_rr * av_rr, contan ? refined : 0.0, contan);
  }

  // End-to-end form on the caller's basis.
  const double av_caller = spectral_norm(multiply(ad, v));
  const bool third_gap = epsilon < s2 / 3.0;
  push("end-to-end |A V|^2 <= 161 eps^2 / (30 s^2)", av_caller * av_caller,
       161.0 * epsilon * epsilon / (30.0 * s2), third_gap);

  return checks;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_repulsion_csv(std::ostream& out, const RepulsionReport& report) {
  out << "trial,min_gap\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.min_gaps.size(); ++i)
    out << i << ',' << report.min_gaps[i] << '\n';
}

void write_angle_trace_csv(std::ostream& out, const AngleTrace& trace) {
  out << "ell,tan_angle,bound_ratio\n" << std::setprecision(17);
  for (std::size_t i = 0; i < trace.tan_angles.size(); ++i)
    out << trace.ell_first + i << ',' << trace.tan_angles[i] << ',' << trace.bound_ratios[i]
        << '\n';
}

void write_bound_checks_csv(std::ostream& out, const std::vector<BoundCheck>& checks) {
  out << "context,quantity,bound,satisfied,applicable\n" << std::setprecision(17);
  for (const BoundCheck& c : checks)
    out << '"' << c.context << "\"," << c.quantity << ',' << c.bound << ','
        << (c.satisfied ? 1 : 0) << ',' << (c.applicable ? 1 : 0) << '\n';
}

}  // namespace nullspace
