#include "nullspace/sparse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <thread>

namespace nullspace {

namespace {

std::atomic<bool> g_force_sequential{false};

}  // namespace

void force_sequential(bool on) { g_force_sequential.store(on); }

std::size_t thread_budget() {
  if (g_force_sequential.load()) return 1;
  if (const char* env = std::getenv("NULLSPACE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    return v <= 1 ? 1 : static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return std::min<std::size_t>(hw == 0 ? 1 : hw, 8);
}

namespace {

void run_over_columns(std::size_t ncols, const std::function<void(std::size_t)>& body) {
  const std::size_t nthreads = std::min(thread_budget(), ncols == 0 ? std::size_t{1} : ncols);
  if (nthreads <= 1 || ncols <= 1) {
    for (std::size_t j = 0; j < ncols; ++j) body(j);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t j = t; j < ncols; j += nthreads) body(j);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.nrows = ncols;
  t.ncols = nrows;
  t.row_offsets.assign(ncols + 1, 0);
  for (std::size_t c : col_indices) ++t.row_offsets[c + 1];
  for (std::size_t i = 0; i < ncols; ++i) t.row_offsets[i + 1] += t.row_offsets[i];
  t.col_indices.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
  for (std::size_t i = 0; i < nrows; ++i) {
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      const std::size_t pos = cursor[col_indices[k]]++;
      t.col_indices[pos] = i;
      t.values[pos] = values[k];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix a;
  a.nrows = a.ncols = n;
  a.row_offsets.resize(n + 1);
  a.col_indices.resize(n);
  a.values.assign(n, 1.0);
  for (std::size_t i = 0; i <= n; ++i) a.row_offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) a.col_indices[i] = i;
  return a;
}

SparseMatrix SparseMatrix::diagonal(const std::vector<double>& d) {
  std::vector<Triplet> trips;
  trips.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) trips.emplace_back(i, i, d[i]);
  return csr_from_triplets(trips, d.size(), d.size());
}

SparseMatrix csr_from_triplets(const std::vector<Triplet>& entries, std::size_t nrows,
                               std::size_t ncols) {
  for (const auto& [r, c, v] : entries) {
    (void)v;
    if (r >= nrows || c >= ncols)
      throw std::invalid_argument("csr_from_triplets: index out of range");
  }

  std::vector<Triplet> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  });

  SparseMatrix out;
  out.nrows = nrows;
  out.ncols = ncols;
  out.row_offsets.assign(nrows + 1, 0);
  out.col_indices.reserve(sorted.size());
  out.values.reserve(sorted.size());

  std::size_t k = 0;
  for (std::size_t i = 0; i < nrows; ++i) {
    while (k < sorted.size() && std::get<0>(sorted[k]) == i) {
      const std::size_t c = std::get<1>(sorted[k]);
      double sum = 0.0;
      while (k < sorted.size() && std::get<0>(sorted[k]) == i && std::get<1>(sorted[k]) == c) {
        sum += std::get<2>(sorted[k]);
        ++k;
      }
      if (sum != 0.0) {
        out.col_indices.push_back(c);
        out.values.push_back(sum);
      }
    }
    out.row_offsets[i + 1] = out.values.size();
  }
  return out;
}

DenseBlock spmv_block(const SparseMatrix& a, const DenseBlock& x) {
  if (x.nrows != a.ncols) throw std::invalid_argument("spmv_block: dimension mismatch");
  DenseBlock y(a.nrows, x.ncols);
  run_over_columns(x.ncols, [&](std::size_t j) {
    const double* xj = x.col(j);
    double* yj = y.col(j);
    for (std::size_t i = 0; i < a.nrows; ++i) {
      double s = 0.0;
      for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
        s += a.values[k] * xj[a.col_indices[k]];
      yj[i] = s;
    }
  });
  return y;
}

DenseBlock spmv_transpose_block(const SparseMatrix& a, const DenseBlock& x) {
  if (x.nrows != a.nrows) throw std::invalid_argument("spmv_transpose_block: dimension mismatch");
  DenseBlock y(a.ncols, x.ncols);
  run_over_columns(x.ncols, [&](std::size_t j) {
    const double* xj = x.col(j);
    double* yj = y.col(j);
    for (std::size_t i = 0; i < a.nrows; ++i) {
      const double xi = xj[i];
      if (xi == 0.0) continue;
      for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
        yj[a.col_indices[k]] += a.values[k] * xi;
    }
  });
  return y;
}

SparseMatrix sparse_multiply(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.ncols != b.nrows) throw std::invalid_argument("sparse_multiply: dimension mismatch");
  SparseMatrix out;
  out.nrows = a.nrows;
  out.ncols = b.ncols;
  out.row_offsets.assign(a.nrows + 1, 0);

  std::vector<double> acc(b.ncols, 0.0);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < a.nrows; ++i) {
    touched.clear();
    for (std::size_t ka = a.row_offsets[i]; ka < a.row_offsets[i + 1]; ++ka) {
      const std::size_t k = a.col_indices[ka];
      const double av = a.values[ka];
      for (std::size_t kb = b.row_offsets[k]; kb < b.row_offsets[k + 1]; ++kb) {
        const std::size_t c = b.col_indices[kb];
        if (acc[c] == 0.0) touched.push_back(c);
        acc[c] += av * b.values[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t c : touched) {
      if (acc[c] != 0.0) {
        out.col_indices.push_back(c);
        out.values.push_back(acc[c]);
      }
      acc[c] = 0.0;
    }
    out.row_offsets[i + 1] = out.values.size();
  }
  return out;
}

bool is_symmetric(const SparseMatrix& a, double rel_tol) {
  if (a.nrows != a.ncols) return false;
  const SparseMatrix t = a.transposed();
  double scale = 0.0;
  for (double v : a.values) scale = std::max(scale, std::abs(v));
  const double tol = rel_tol * std::max(scale, 1.0);

  for (std::size_t i = 0; i < a.nrows; ++i) {
    std::size_t ka = a.row_offsets[i];
    std::size_t kt = t.row_offsets[i];
    const std::size_t ea = a.row_offsets[i + 1];
    const std::size_t et = t.row_offsets[i + 1];
    while (ka < ea || kt < et) {
      const std::size_t ca = ka < ea ? a.col_indices[ka] : a.ncols;
      const std::size_t ct = kt < et ? t.col_indices[kt] : a.ncols;
      if (ca == ct) {
        if (std::abs(a.values[ka] - t.values[kt]) > tol) return false;
        ++ka;
        ++kt;
      } else if (ca < ct) {
        if (std::abs(a.values[ka]) > tol) return false;
        ++ka;
      } else {
        if (std::abs(t.values[kt]) > tol) return false;
        ++kt;
      }
    }
  }
  return true;
}

DenseBlock to_dense(const SparseMatrix& a) {
  DenseBlock d(a.nrows, a.ncols);
  for (std::size_t i = 0; i < a.nrows; ++i)
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      d.at(i, a.col_indices[k]) = a.values[k];
  return d;
}

}  // namespace nullspace
