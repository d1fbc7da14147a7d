#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nullspace/sparse.hpp"

namespace nullspace {

/// Undirected edge list; self-loops dropped, duplicates collapsed, node ids
/// remapped to 0..num_nodes-1 in first-seen order (original ids retained).
struct EdgeList {
  std::vector<std::uint64_t> node_ids;              // new index -> original id
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // deduplicated, i < j
  std::size_t num_nodes() const { return node_ids.size(); }
};

/// Parse a whitespace-separated edge list, one "u v" pair per line.  Blank
/// lines and lines starting with '#' or '%' are skipped; anything else that
/// fails to parse as two integers raises ParseError.
EdgeList read_edge_list(std::istream& in);
EdgeList read_edge_list_file(const std::string& path);

struct LaplacianBuild {
  SparseMatrix laplacian;                  // Deg - Adj of the surviving graph
  std::vector<std::uint64_t> node_ids;     // row -> original node id
  std::size_t components = 0;              // connected components (union-find)
  std::size_t dropped_low_degree = 0;
  std::size_t dropped_isolated = 0;
};

/// Single-pass preprocessing: drop nodes of degree < degree_threshold with
/// their incident edges, then drop nodes that became isolated; build the
/// graph Laplacian of what survives.  Not iterated to a fixed point.
LaplacianBuild build_laplacian(const EdgeList& graph, std::size_t degree_threshold);

}  // namespace nullspace
