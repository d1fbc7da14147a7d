#include "nullspace/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "nullspace/matrix_market.hpp"

namespace nullspace {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

EdgeList read_edge_list(std::istream& in) {
  EdgeList out;
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<std::pair<std::size_t, std::size_t>> raw;

  const auto node = [&](std::uint64_t id) {
    auto [it, inserted] = index.emplace(id, out.node_ids.size());
    if (inserted) out.node_ids.push_back(id);
    return it->second;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '#' || line[i] == '%') continue;

    std::istringstream tokens(line);
    std::uint64_t u = 0, v = 0;
    if (!(tokens >> u >> v))
      throw ParseError("edge list: malformed line " + std::to_string(lineno) + ": '" + line + "'");
    std::string rest;
    if (tokens >> rest)
      throw ParseError("edge list: trailing tokens on line " + std::to_string(lineno));
    std::size_t a = node(u);
    std::size_t b = node(v);
    if (a == b) continue;  // self-loop; the node stays registered
    if (a > b) std::swap(a, b);
    raw.emplace_back(a, b);
  }

  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
  out.edges = std::move(raw);
  return out;
}

EdgeList read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_edge_list(in);
}

LaplacianBuild build_laplacian(const EdgeList& graph, std::size_t degree_threshold) {
  const std::size_t n0 = graph.num_nodes();
  std::vector<std::size_t> degree(n0, 0);
  for (const auto& [a, b] : graph.edges) {
    ++degree[a];
    ++degree[b];
  }

  LaplacianBuild out;
  std::vector<bool> keep(n0);
  for (std::size_t i = 0; i < n0; ++i) {
    keep[i] = degree[i] >= degree_threshold;
    if (!keep[i]) ++out.dropped_low_degree;
  }

  // Degrees after removing incident edges of dropped nodes; newly isolated
  // nodes go too (single pass, not iterated).
  std::vector<std::size_t> degree_after(n0, 0);
  for (const auto& [a, b] : graph.edges) {
    if (keep[a] && keep[b]) {
      ++degree_after[a];
      ++degree_after[b];
    }
  }
  for (std::size_t i = 0; i < n0; ++i) {
    if (keep[i] && degree_after[i] == 0) {
      keep[i] = false;
      ++out.dropped_isolated;
    }
  }

  std::vector<std::size_t> remap(n0, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < n0; ++i) {
    if (keep[i]) {
      remap[i] = out.node_ids.size();
      out.node_ids.push_back(graph.node_ids[i]);
    }
  }

  const std::size_t n = out.node_ids.size();
  UnionFind uf(n);
  std::vector<Triplet> trips;
  std::vector<double> diag(n, 0.0);
  for (const auto& [a, b] : graph.edges) {
    if (!keep[a] || !keep[b]) continue;
    const std::size_t i = remap[a];
    const std::size_t j = remap[b];
    trips.emplace_back(i, j, -1.0);
    trips.emplace_back(j, i, -1.0);
    diag[i] += 1.0;
    diag[j] += 1.0;
    uf.unite(i, j);
  }
  for (std::size_t i = 0; i < n; ++i) trips.emplace_back(i, i, diag[i]);
  out.laplacian = csr_from_triplets(trips, n, n);

  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (!seen[root]) {
      seen[root] = true;
      ++out.components;
    }
  }
  return out;
}

}  // namespace nullspace
