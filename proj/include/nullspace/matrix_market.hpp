#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "nullspace/sparse.hpp"

namespace nullspace {

/// Raised on malformed Matrix Market or edge-list input.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Read a Matrix Market coordinate file (real, integer or pattern field;
/// general, symmetric or skew-symmetric storage).  Symmetric storage is
/// expanded to general.  Indices are 1-based on disk.
SparseMatrix read_matrix_market(std::istream& in);
SparseMatrix read_matrix_market_file(const std::string& path);

/// Write in coordinate real general format with full double precision, so a
/// write/read round trip reproduces the matrix exactly.
void write_matrix_market(std::ostream& out, const SparseMatrix& a);
void write_matrix_market_file(const std::string& path, const SparseMatrix& a);

/// Dense output in array real general format (used for null-space bases).
void write_matrix_market_array(std::ostream& out, const DenseBlock& a);
void write_matrix_market_array_file(const std::string& path, const DenseBlock& a);

}  // namespace nullspace
