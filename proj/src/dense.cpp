#include "nullspace/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nullspace {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(const double* a, std::size_t n) { return std::sqrt(dot(a, a, n)); }

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

DenseBlock DenseBlock::identity(std::size_t n) {
  DenseBlock a(n, n);
  for (std::size_t i = 0; i < n; ++i) a.at(i, i) = 1.0;
  return a;
}

DenseBlock DenseBlock::gaussian(std::size_t rows, std::size_t cols, CounterRng& rng) {
  DenseBlock a(rows, cols);
  for (double& v : a.data) v = rng.gaussian();
  return a;
}

DenseBlock DenseBlock::columns(std::size_t first, std::size_t count) const {
  require(first + count <= ncols, "DenseBlock::columns: range out of bounds");
  DenseBlock out(nrows, count);
  std::copy(col(first), col(first) + nrows * count, out.data.begin());
  return out;
}

void DenseBlock::set_columns(std::size_t first, const DenseBlock& src) {
  require(src.nrows == nrows && first + src.ncols <= ncols,
          "DenseBlock::set_columns: shape mismatch");
  std::copy(src.data.begin(), src.data.end(), col(first));
}

void DenseBlock::append_columns(const DenseBlock& src) {
  if (empty() && ncols == 0) {
    if (nrows == 0) nrows = src.nrows;
  }
  require(src.nrows == nrows, "DenseBlock::append_columns: row mismatch");
  data.insert(data.end(), src.data.begin(), src.data.end());
  ncols += src.ncols;
}

DenseBlock multiply(const DenseBlock& a, const DenseBlock& b) {
  require(a.ncols == b.nrows, "multiply: inner dimension mismatch");
  DenseBlock c(a.nrows, b.ncols);
  for (std::size_t j = 0; j < b.ncols; ++j) {
    double* cj = c.col(j);
    for (std::size_t k = 0; k < a.ncols; ++k) {
      const double bkj = b.at(k, j);
      if (bkj == 0.0) continue;
      const double* ak = a.col(k);
      for (std::size_t i = 0; i < a.nrows; ++i) cj[i] += ak[i] * bkj;
    }
  }
  return c;
}

DenseBlock transpose_multiply(const DenseBlock& a, const DenseBlock& b) {
  require(a.nrows == b.nrows, "transpose_multiply: row mismatch");
  DenseBlock c(a.ncols, b.ncols);
  for (std::size_t j = 0; j < b.ncols; ++j)
    for (std::size_t i = 0; i < a.ncols; ++i)
      c.at(i, j) = dot(a.col(i), b.col(j), a.nrows);
  return c;
}

DenseBlock transpose(const DenseBlock& a) {
  DenseBlock t(a.ncols, a.nrows);
  for (std::size_t j = 0; j < a.ncols; ++j)
    for (std::size_t i = 0; i < a.nrows; ++i) t.at(j, i) = a.at(i, j);
  return t;
}

void add_scaled(DenseBlock& y, double alpha, const DenseBlock& x) {
  require(y.nrows == x.nrows && y.ncols == x.ncols, "add_scaled: shape mismatch");
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

double frobenius_norm(const DenseBlock& a) { return norm2(a.data.data(), a.data.size()); }

double max_abs(const DenseBlock& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

double spectral_norm(const DenseBlock& a) {
  if (a.empty()) return 0.0;
  // Gram route keeps this independent of thin_svd.
  const DenseBlock g = a.nrows >= a.ncols ? transpose_multiply(a, a)
                                          : transpose_multiply(transpose(a), transpose(a));
  const std::vector<double> ev = sym_eigvals(g);
  return std::sqrt(std::max(0.0, ev.back()));
}

double orthonormality_defect(const DenseBlock& a) {
  if (a.empty()) return 0.0;
  DenseBlock g = transpose_multiply(a, a);
  for (std::size_t i = 0; i < g.nrows; ++i) g.at(i, i) -= 1.0;
  return max_abs(g);
}

// ---------------------------------------------------------------------------
// Block QR
// ---------------------------------------------------------------------------

QRResult block_qr(const DenseBlock& x, const DenseBlock& against, std::uint64_t seed) {
  const std::size_t n = x.nrows;
  const std::size_t d = x.ncols;
  require(n >= d, "block_qr: fewer rows than columns");
  if (!against.empty()) require(against.nrows == n, "block_qr: against row mismatch");

  QRResult out;
  out.q = x;
  out.r = DenseBlock(d, d);

  std::vector<double> orig_norm(d);
  for (std::size_t j = 0; j < d; ++j) orig_norm[j] = norm2(x.col(j), n);

  auto project_out_against = [&](double* v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < against.ncols; ++i) {
        const double* ai = against.col(i);
        const double c = dot(ai, v, n);
        for (std::size_t k = 0; k < n; ++k) v[k] -= c * ai[k];
      }
    }
  };

  CounterRng replacement_rng(seed ^ 0x7c3a1db592e0f681ULL, 0x51c0de);

  for (std::size_t j = 0; j < d; ++j) {
    double* qj = out.q.col(j);
    if (!against.empty()) project_out_against(qj);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const double* qi = out.q.col(i);
        const double c = dot(qi, qj, n);
        out.r.at(i, j) += c;
        for (std::size_t k = 0; k < n; ++k) qj[k] -= c * qi[k];
      }
    }
    double nrm = norm2(qj, n);
    if (nrm <= static_cast<double>(n) * kEps * (orig_norm[j] + 1.0)) {
      // Dependent column: replace with a random direction orthogonal to
      // everything seen so far; its R column carries no information.
      out.replaced_columns.push_back(j);
      bool ok = false;
      for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
        for (std::size_t k = 0; k < n; ++k) qj[k] = replacement_rng.gaussian();
        if (!against.empty()) project_out_against(qj);
        for (int pass = 0; pass < 2; ++pass) {
          for (std::size_t i = 0; i < j; ++i) {
            const double* qi = out.q.col(i);
            const double c = dot(qi, qj, n);
            for (std::size_t k = 0; k < n; ++k) qj[k] -= c * qi[k];
          }
        }
        nrm = norm2(qj, n);
        ok = nrm > 1e-8 * std::sqrt(static_cast<double>(n));
      }
      if (!ok) throw std::runtime_error("block_qr: breakdown replacement exhausted retries");
      for (std::size_t i = 0; i <= j; ++i) out.r.at(i, j) = 0.0;
      for (std::size_t k = 0; k < n; ++k) qj[k] /= nrm;
    } else {
      out.r.at(j, j) = nrm;
      for (std::size_t k = 0; k < n; ++k) qj[k] /= nrm;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver (Householder tridiagonalization + implicit-shift QL)
// ---------------------------------------------------------------------------

namespace {

// Reduce the symmetric matrix stored in z to tridiagonal form (d, e).  When
// accumulating, z is overwritten with the orthogonal transformation.
void householder_tridiag(DenseBlock& z, std::vector<double>& d, std::vector<double>& e,
                         bool accumulate) {
  const std::size_t n = z.nrows;
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  if (n == 0) return;

  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t l = i - 1;
    double h = 0.0;
    double scale = 0.0;
    if (l > 0) {
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(z.at(i, k));
      if (scale == 0.0) {
        e[i] = z.at(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          z.at(i, k) /= scale;
          h += z.at(i, k) * z.at(i, k);
        }
        double f = z.at(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z.at(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          if (accumulate) z.at(j, i) = z.at(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += z.at(j, k) * z.at(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += z.at(k, j) * z.at(i, k);
          e[j] = g / h;
          f += e[j] * z.at(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = z.at(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k) z.at(j, k) -= f * e[k] + g * z.at(i, k);
        }
      }
    } else {
      e[i] = z.at(i, l);
    }
    d[i] = h;
  }

  if (accumulate) {
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] != 0.0) {
        for (std::size_t j = 0; j < i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k < i; ++k) g += z.at(i, k) * z.at(k, j);
          for (std::size_t k = 0; k < i; ++k) z.at(k, j) -= g * z.at(k, i);
        }
      }
      d[i] = z.at(i, i);
      z.at(i, i) = 1.0;
      for (std::size_t j = 0; j < i; ++j) {
        z.at(j, i) = 0.0;
        z.at(i, j) = 0.0;
      }
    }
  } else {
    // Values only: the reduced tridiagonal diagonal sits on z's diagonal.
    for (std::size_t i = 0; i < n; ++i) d[i] = z.at(i, i);
  }
}

// Implicit-shift QL on the tridiagonal (d, e); rotations are applied to the
// columns of z when accumulating.
void ql_implicit(std::vector<double>& d, std::vector<double>& e, DenseBlock* z) {
  const std::size_t n = d.size();
  if (n <= 1) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    for (;;) {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= kEps * dd) break;
      }
      if (m == l) break;
      if (iter++ == 60) throw std::runtime_error("sym_eig: QL iteration failed to converge");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0;
      double c = 1.0;
      double p = 0.0;
      bool underflow = false;
      for (std::size_t ii = m; ii-- > l;) {
        const std::size_t i = ii;
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        if (z != nullptr) {
          for (std::size_t k = 0; k < z->nrows; ++k) {
            f = z->at(k, i + 1);
            z->at(k, i + 1) = s * z->at(k, i) + c * f;
            z->at(k, i) = c * z->at(k, i) - s * f;
          }
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
}

DenseBlock symmetrized_copy(const DenseBlock& t) {
  require(t.nrows == t.ncols, "sym_eig: matrix must be square");
  for (double v : t.data)
    if (!std::isfinite(v)) throw std::invalid_argument("sym_eig: non-finite entry");
  DenseBlock z(t.nrows, t.nrows);
  for (std::size_t j = 0; j < t.nrows; ++j)
    for (std::size_t i = 0; i < t.nrows; ++i) z.at(i, j) = 0.5 * (t.at(i, j) + t.at(j, i));
  return z;
}

}  // namespace

EigResult sym_eig(const DenseBlock& t) {
  DenseBlock z = symmetrized_copy(t);
  const std::size_t n = z.nrows;
  EigResult out;
  if (n == 0) return out;

  std::vector<double> d;
  std::vector<double> e;
  householder_tridiag(z, d, e, /*accumulate=*/true);
  ql_implicit(d, e, &z);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  out.eigenvalues.resize(n);
  out.eigenvectors = DenseBlock(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = d[order[j]];
    std::copy(z.col(order[j]), z.col(order[j]) + n, out.eigenvectors.col(j));
  }
  return out;
}

std::vector<double> sym_eigvals(const DenseBlock& t) {
  DenseBlock z = symmetrized_copy(t);
  const std::size_t n = z.nrows;
  if (n == 0) return {};

  std::vector<double> d;
  std::vector<double> e;
  householder_tridiag(z, d, e, /*accumulate=*/false);
  ql_implicit(d, e, nullptr);
  std::sort(d.begin(), d.end());
  return d;
}

// ---------------------------------------------------------------------------
// Thin SVD (one-sided Jacobi)
// ---------------------------------------------------------------------------

SvdResult thin_svd(const DenseBlock& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) throw std::invalid_argument("thin_svd: non-finite entry");

  if (m.nrows < m.ncols) {
    SvdResult t = thin_svd(transpose(m));
    return SvdResult{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
  }

  const std::size_t p = m.nrows;
  const std::size_t q = m.ncols;
  SvdResult out;
  if (q == 0) {
    out.u = DenseBlock(p, 0);
    out.v = DenseBlock(0, 0);
    return out;
  }

  DenseBlock a = m;
  DenseBlock v = DenseBlock::identity(q);

  for (int sweep = 0; sweep < 64; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        double* ai = a.col(i);
        double* aj = a.col(j);
        const double alpha = dot(ai, ai, p);
        const double beta = dot(aj, aj, p);
        const double gamma = dot(ai, aj, p);
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < p; ++k) {
          const double x = ai[k];
          const double y = aj[k];
          ai[k] = c * x - s * y;
          aj[k] = s * x + c * y;
        }
        double* vi = v.col(i);
        double* vj = v.col(j);
        for (std::size_t k = 0; k < q; ++k) {
          const double x = vi[k];
          const double y = vj[k];
          vi[k] = c * x - s * y;
          vj[k] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> s(q);
  for (std::size_t j = 0; j < q; ++j) s[j] = norm2(a.col(j), p);

  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });

  out.u = DenseBlock(p, q);
  out.v = DenseBlock(q, q);
  out.singular_values.resize(q);
  std::vector<std::size_t> zero_cols;
  for (std::size_t j = 0; j < q; ++j) {
    const std::size_t src = order[j];
    out.singular_values[j] = std::max(0.0, s[src]);
    std::copy(v.col(src), v.col(src) + q, out.v.col(j));
    if (s[src] > 0.0) {
      const double inv = 1.0 / s[src];
      for (std::size_t k = 0; k < p; ++k) out.u.at(k, j) = a.at(k, src) * inv;
    } else {
      zero_cols.push_back(j);
    }
  }

  // Complete U orthonormally for exactly-zero singular values.
  for (std::size_t j : zero_cols) {
    double* uj = out.u.col(j);
    bool done = false;
    for (std::size_t k = 0; k < p && !done; ++k) {
      std::fill(uj, uj + p, 0.0);
      uj[k] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < q; ++i) {
          if (i == j) continue;
          const double* ui = out.u.col(i);
          const double c = dot(ui, uj, p);
          for (std::size_t r = 0; r < p; ++r) uj[r] -= c * ui[r];
        }
      }
      const double nrm = norm2(uj, p);
      if (nrm > 1e-3) {
        for (std::size_t r = 0; r < p; ++r) uj[r] /= nrm;
        done = true;
      }
    }
    if (!done) throw std::runtime_error("thin_svd: failed to complete orthonormal basis");
  }
  return out;
}

DenseBlock pseudo_inverse(const DenseBlock& m, double rel_tol) {
  const SvdResult svd = thin_svd(m);
  DenseBlock pinv(m.ncols, m.nrows);
  if (svd.singular_values.empty()) return pinv;
  const double cutoff = rel_tol * svd.singular_values.front();
  for (std::size_t k = 0; k < svd.singular_values.size(); ++k) {
    const double sk = svd.singular_values[k];
    if (sk <= cutoff || sk == 0.0) continue;
    const double inv = 1.0 / sk;
    for (std::size_t j = 0; j < m.nrows; ++j) {
      const double w = inv * svd.u.at(j, k);
      if (w == 0.0) continue;
      double* pj = pinv.col(j);
      const double* vk = svd.v.col(k);
      for (std::size_t i = 0; i < m.ncols; ++i) pj[i] += vk[i] * w;
    }
  }
  return pinv;
}

// ---------------------------------------------------------------------------
// Chebyshev and angles
// ---------------------------------------------------------------------------

double chebyshev_eval(std::size_t k, double x) {
  const double kk = static_cast<double>(k);
  if (x >= 1.0) return std::cosh(kk * std::acosh(x));
  if (x <= -1.0) {
    const double v = std::cosh(kk * std::acosh(-x));
    return (k % 2 == 0) ? v : -v;
  }
  return std::cos(kk * std::acos(x));
}

std::vector<double> principal_angles(const DenseBlock& v0, const DenseBlock& v1) {
  require(v0.nrows == v1.nrows, "principal_angles: row mismatch");
  if (orthonormality_defect(v0) > 1e-10 || orthonormality_defect(v1) > 1e-10)
    throw std::invalid_argument("principal_angles: inputs must be orthonormal");

  const SvdResult svd = thin_svd(transpose_multiply(v0, v1));
  std::vector<double> angles;
  angles.reserve(svd.singular_values.size());
  for (double s : svd.singular_values)
    angles.push_back(std::acos(std::clamp(s, 0.0, 1.0)));
  // Descending cosines give ascending angles already.
  return angles;
}

double tan_angle(const DenseBlock& v0, const DenseBlock& vperp, const DenseBlock& omega) {
  require(v0.nrows == vperp.nrows && v0.nrows == omega.nrows, "tan_angle: row mismatch");
  require(v0.ncols + vperp.ncols == v0.nrows, "tan_angle: [v0, vperp] must be square");
  require(omega.ncols <= v0.ncols, "tan_angle: omega has more columns than v0");

  const DenseBlock m0 = transpose_multiply(v0, omega);
  const SvdResult svd = thin_svd(m0);
  const double smin = svd.singular_values.empty() ? 0.0 : svd.singular_values.back();
  // Rank test against the scale of Omega itself; the angle is undefined
  // (infinite tangent) when V0^T Omega loses rank.
  if (smin <= 1e-12 * spectral_norm(omega) || smin == 0.0)
    throw std::runtime_error("tan_angle: V0^T Omega is numerically rank deficient");

  const DenseBlock mp = transpose_multiply(vperp, omega);
  return spectral_norm(multiply(mp, pseudo_inverse(m0)));
}

}  // namespace nullspace
