#include "nullspace/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace nullspace {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size()) continue;  // blank
    if (line[i] == '%') continue;    // comment
    return true;
  }
  return false;
}

}  // namespace

SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("matrix market: empty input");

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (lower(banner) != "%%matrixmarket")
    throw ParseError("matrix market: missing %%MatrixMarket banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") throw ParseError("matrix market: unsupported object '" + object + "'");
  if (format != "coordinate")
    throw ParseError("matrix market: unsupported format '" + format + "'");
  if (field != "real" && field != "integer" && field != "pattern")
    throw ParseError("matrix market: unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    throw ParseError("matrix market: unsupported symmetry '" + symmetry + "'");

  if (!next_data_line(in, line)) throw ParseError("matrix market: missing size line");
  std::istringstream size_line(line);
  long long m = 0, n = 0, nnz = 0;
  if (!(size_line >> m >> n >> nnz) || m < 0 || n < 0 || nnz < 0)
    throw ParseError("matrix market: malformed size line '" + line + "'");

  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";
  const bool skew = symmetry == "skew-symmetric";

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(nnz) * (symmetric || skew ? 2 : 1));
  for (long long k = 0; k < nnz; ++k) {
    if (!next_data_line(in, line)) throw ParseError("matrix market: truncated entry list");
    std::istringstream entry(line);
    long long i = 0, j = 0;
    double v = 1.0;
    if (!(entry >> i >> j)) throw ParseError("matrix market: malformed entry '" + line + "'");
    if (!pattern && !(entry >> v))
      throw ParseError("matrix market: malformed value in '" + line + "'");
    if (i < 1 || i > m || j < 1 || j > n)
      throw ParseError("matrix market: entry index out of range in '" + line + "'");
    const std::size_t r = static_cast<std::size_t>(i - 1);
    const std::size_t c = static_cast<std::size_t>(j - 1);
    trips.emplace_back(r, c, v);
    if ((symmetric || skew) && r != c) trips.emplace_back(c, r, skew ? -v : v);
  }
  return csr_from_triplets(trips, static_cast<std::size_t>(m), static_cast<std::size_t>(n));
}

SparseMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.nrows << ' ' << a.ncols << ' ' << a.nnz() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < a.nrows; ++i)
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      out << i + 1 << ' ' << a.col_indices[k] + 1 << ' ' << a.values[k] << '\n';
}

void write_matrix_market_file(const std::string& path, const SparseMatrix& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_matrix_market(out, a);
}

void write_matrix_market_array(std::ostream& out, const DenseBlock& a) {
  out << "%%MatrixMarket matrix array real general\n";
  out << a.nrows << ' ' << a.ncols << '\n';
  out << std::setprecision(17);
  for (std::size_t j = 0; j < a.ncols; ++j)
    for (std::size_t i = 0; i < a.nrows; ++i) out << a.at(i, j) << '\n';
}

void write_matrix_market_array_file(const std::string& path, const DenseBlock& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_matrix_market_array(out, a);
}

}  // namespace nullspace
