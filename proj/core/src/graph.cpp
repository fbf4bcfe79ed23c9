#include "cmsd/graph.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "cmsd/errors.hpp"

namespace cmsd {

DecoderGraph::DecoderGraph(std::size_t nodes) : in_neighbors_(nodes) {}

DecoderGraph DecoderGraph::from_adjacency(std::size_t nodes, std::span<const std::uint8_t> matrix) {
  if (matrix.size() != nodes * nodes) {
    throw DimensionError("adjacency of " + std::to_string(matrix.size()) + " entries for " +
                         std::to_string(nodes) + " nodes");
  }
  DecoderGraph g(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = 0; j < nodes; ++j) {
      const auto e = matrix[i * nodes + j];
      if (e > 1) throw ConfigError("adjacency entries must be 0 or 1");
      if (e == 0) continue;
      if (i == j) throw ConfigError("adjacency diagonal must be 0 (node " + std::to_string(i) + ")");
      g.connect(i, j);
    }
  }
  return g;
}

DecoderGraph DecoderGraph::complete(std::size_t nodes) {
  DecoderGraph g(nodes);
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j)
      if (i != j) g.connect(i, j);
  return g;
}

void DecoderGraph::check(std::size_t node) const {
  if (node >= size()) {
    throw IndexError("node " + std::to_string(node) + " outside graph of " + std::to_string(size()));
  }
}

bool DecoderGraph::edge(std::size_t receiver, std::size_t sender) const {
  check(receiver);
  check(sender);
  const auto& n = in_neighbors_[receiver];
  return std::binary_search(n.begin(), n.end(), sender);
}

void DecoderGraph::connect(std::size_t receiver, std::size_t sender) {
  check(receiver);
  check(sender);
  if (receiver == sender) throw ConfigError("self loop on node " + std::to_string(receiver));
  auto& n = in_neighbors_[receiver];
  auto it = std::lower_bound(n.begin(), n.end(), sender);
  if (it != n.end() && *it == sender) return;
  n.insert(it, sender);
  ++edge_count_;
}

std::span<const std::size_t> DecoderGraph::in_neighbors(std::size_t receiver) const {
  check(receiver);
  return in_neighbors_[receiver];
}

std::size_t DecoderGraph::edge_offset(std::size_t receiver) const {
  if (receiver > size()) check(receiver);
  std::size_t offset = 0;
  for (std::size_t v = 0; v < receiver; ++v) offset += in_neighbors_[v].size();
  return offset;
}

std::vector<std::uint8_t> DecoderGraph::adjacency() const {
  const std::size_t n = size();
  std::vector<std::uint8_t> m(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : in_neighbors_[i]) m[i * n + j] = 1;
  return m;
}

bool DecoderGraph::symmetric() const {
  for (std::size_t i = 0; i < size(); ++i)
    for (auto j : in_neighbors_[i])
      if (!edge(j, i)) return false;
  return true;
}

DecoderGraph DecoderGraph::replicate(std::size_t copies) const {
  DecoderGraph g(size() * copies);
  for (std::size_t i = 0; i < size(); ++i)
    for (auto j : in_neighbors_[i])
      for (std::size_t b = 0; b < copies; ++b) g.connect(i * copies + b, j * copies + b);
  return g;
}

DecoderGraph DecoderGraph::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != size()) throw DimensionError("permutation size does not match graph");
  DecoderGraph g(size());
  for (std::size_t i = 0; i < size(); ++i)
    for (auto j : in_neighbors_[i]) g.connect(perm[i], perm[j]);
  return g;
}

std::size_t DecoderGraph::distance(std::size_t from, std::size_t to) const {
  check(from);
  check(to);
  // Messages travel sender -> receiver, so walk outgoing edges.
  std::vector<std::vector<std::size_t>> out(size());
  for (std::size_t v = 0; v < size(); ++v)
    for (auto u : in_neighbors_[v]) out[u].push_back(v);
  std::vector<std::size_t> dist(size(), size());
  std::deque<std::size_t> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : out[u]) {
      if (dist[v] != size()) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return dist[to];
}

DecoderGraph build_adjacency(std::span<const Correlation> correlations, std::size_t nodes) {
  DecoderGraph g(nodes);
  for (const auto& c : correlations) {
    if (c.from >= nodes || c.to >= nodes) {
      throw IndexError("correlation (" + std::to_string(c.from) + ", " + std::to_string(c.to) +
                       ") outside " + std::to_string(nodes) + " nodes");
    }
    if (c.from == c.to) continue;
    g.connect(c.to, c.from);
    if (!c.directed) g.connect(c.from, c.to);
  }
  return g;
}

}  // namespace cmsd
