#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lt/ir.h"

namespace lt {

// Digest of a graph's canonical structure, with dynamic-scalar values masked.
struct CacheKey {
  uint64_t hi = 0;
  uint64_t lo = 0;
  size_t param_arity = 0;

  std::string ToString() const;
  bool operator==(const CacheKey&) const = default;
};

struct CacheKeyHash {
  size_t operator()(const CacheKey& key) const { return key.lo ^ (key.hi * 31); }
};

struct ParamDescriptor {
  NodeId node = 0;
  Shape shape;
  bool dynamic_scalar = false;
};

struct CanonicalForm {
  CacheKey key;
  // Binding convention of the compiled program: DeviceData leaves in
  // first-visit order.
  std::vector<ParamDescriptor> params;
  // Reachable nodes, children before parents.
  std::vector<NodeId> post_order;
  // Canonical index per graph node id, -1 for nodes unreachable from roots.
  std::vector<int64_t> index;
  std::vector<int64_t> root_indices;
};

// Deterministic post-order from the roots. Among a node's operands the one
// with the taller subtree is visited first; equal heights are visited
// right-to-left. Shared nodes are visited once.
std::vector<NodeId> CanonicalPostOrder(const IrGraph& graph,
                                       std::span<const NodeId> roots);

CanonicalForm Canonicalize(const IrGraph& graph, std::span<const NodeId> roots);

std::string DumpText(const IrGraph& graph, std::span<const NodeId> roots);

// A graph paired with the nodes whose values are requested.
struct RootedGraph {
  IrGraph graph;
  std::vector<NodeId> roots;
};

// Rebuilds the reachable part of `graph` in canonical order, numbering
// DeviceData leaves with their param slot and dropping their bound data.
// This is the immutable form handed to the compiler.
RootedGraph CanonicalSnapshot(const IrGraph& graph, std::span<const NodeId> roots,
                              const CanonicalForm& form);

// Streaming 128-bit digest: two independently seeded 64-bit lanes.
class Hasher128 {
 public:
  void Add(uint64_t word);
  void AddDouble(double value);
  void AddString(std::string_view text);
  CacheKey Finish(size_t param_arity) const;

 private:
  uint64_t a_ = 0x243f6a8885a308d3ULL;
  uint64_t b_ = 0x13198a2e03707344ULL;
  uint64_t count_ = 0;
};

}  // namespace lt
