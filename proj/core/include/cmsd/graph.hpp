#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cmsd {

/// Binary dependency matrix over decoders. E(i,j) = 1 means decoder j's
/// messages reach decoder i. The diagonal is always 0: a decoder's own state
/// reaches it through the recurrent update, not through a message.
class DecoderGraph {
 public:
  DecoderGraph() = default;
  explicit DecoderGraph(std::size_t nodes);

  /// Row-major n x n matrix of 0/1 entries with a zero diagonal.
  static DecoderGraph from_adjacency(std::size_t nodes, std::span<const std::uint8_t> matrix);
  /// Every ordered pair of distinct nodes connected.
  static DecoderGraph complete(std::size_t nodes);

  std::size_t size() const { return in_neighbors_.size(); }
  bool edge(std::size_t receiver, std::size_t sender) const;
  /// Sets E(receiver, sender) = 1. Self loops are rejected.
  void connect(std::size_t receiver, std::size_t sender);

  /// Senders whose messages reach `receiver`, ascending.
  std::span<const std::size_t> in_neighbors(std::size_t receiver) const;
  std::size_t edge_count() const { return edge_count_; }
  /// Offset of `receiver`'s first incoming edge in canonical edge order
  /// (receivers ascending, then senders ascending). Valid for 0..size().
  std::size_t edge_offset(std::size_t receiver) const;

  std::vector<std::uint8_t> adjacency() const;
  bool symmetric() const;

  /// Block-diagonal graph holding `copies` disjoint replicas; node i of copy b
  /// becomes node i * copies + b.
  DecoderGraph replicate(std::size_t copies) const;
  /// Relabels node i as perm[i].
  DecoderGraph permuted(std::span<const std::size_t> perm) const;
  /// Number of hops from `from` to `to` following message direction, or
  /// size() when unreachable.
  std::size_t distance(std::size_t from, std::size_t to) const;

  friend bool operator==(const DecoderGraph&, const DecoderGraph&) = default;

 private:
  void check(std::size_t node) const;

  std::vector<std::vector<std::size_t>> in_neighbors_;
  std::size_t edge_count_ = 0;
};

/// A correlation between two decoders. Undirected correlations connect both
/// ways; directed ones carry `from`'s messages to `to` only.
struct Correlation {
  std::size_t from;
  std::size_t to;
  bool directed = false;
};

/// E(i,j) = E(j,i) = 1 for each undirected pair, E(to,from) = 1 for directed
/// ones, 0 elsewhere. Self correlations are ignored.
DecoderGraph build_adjacency(std::span<const Correlation> correlations, std::size_t nodes);

}  // namespace cmsd
