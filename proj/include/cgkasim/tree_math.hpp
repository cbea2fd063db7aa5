#pragma once

#include "cgkasim/errors.hpp"

#include <cstdint>
#include <vector>

namespace cgkasim::tree_math {

// Array representation of a complete binary tree: leaves sit at even indices
// (leaf i at node 2i), internal nodes at odd indices. A tree with N leaves
// (N a power of two) occupies nodes [0, 2N-2] with the root at N-1. Doubling
// the leaf count appends nodes without renumbering existing ones, so private
// key material indexed by node survives tree growth.

using NodeIndex = uint32_t;
using LeafIndex = uint32_t;

constexpr NodeIndex
node_index(LeafIndex leaf)
{
  return 2 * leaf;
}

constexpr LeafIndex
leaf_index(NodeIndex node)
{
  return node / 2;
}

constexpr bool
is_leaf(NodeIndex node)
{
  return node % 2 == 0;
}

constexpr uint32_t
node_width(uint32_t leaf_count)
{
  return leaf_count == 0 ? 0 : 2 * leaf_count - 1;
}

constexpr bool
is_power_of_two(uint32_t n)
{
  return n != 0 && (n & (n - 1)) == 0;
}

// Height of a node above the leaf level: trailing ones in the index.
constexpr uint32_t
level(NodeIndex node)
{
  uint32_t l = 0;
  while ((node & 1) == 1) {
    node >>= 1;
    l++;
  }
  return l;
}

constexpr NodeIndex
root(uint32_t leaf_count)
{
  return leaf_count - 1;
}

constexpr NodeIndex
left_child(NodeIndex node)
{
  const uint32_t l = level(node);
  if (l == 0) {
    throw InvalidParameterError("leaf has no children");
  }
  return node - (NodeIndex(1) << (l - 1));
}

constexpr NodeIndex
right_child(NodeIndex node)
{
  const uint32_t l = level(node);
  if (l == 0) {
    throw InvalidParameterError("leaf has no children");
  }
  return node + (NodeIndex(1) << (l - 1));
}

// Parent in the (conceptually unbounded) tree; callers bound by the root.
constexpr NodeIndex
parent(NodeIndex node)
{
  const uint32_t l = level(node);
  const NodeIndex b = (node >> (l + 1)) & 1;
  return (node | (NodeIndex(1) << l)) ^ (b << (l + 1));
}

constexpr NodeIndex
sibling(NodeIndex node)
{
  const NodeIndex p = parent(node);
  return node < p ? right_child(p) : left_child(p);
}

// Nodes from the leaf's parent up to and including the root.
inline std::vector<NodeIndex>
direct_path(LeafIndex leaf, uint32_t leaf_count)
{
  std::vector<NodeIndex> path;
  if (leaf_count <= 1) {
    return path;
  }
  NodeIndex n = node_index(leaf);
  const NodeIndex r = root(leaf_count);
  while (n != r) {
    n = parent(n);
    path.push_back(n);
  }
  return path;
}

// Sibling of the leaf, then the sibling of each direct-path node short of the
// root; element i is the child of direct_path[i] that is not on the path.
inline std::vector<NodeIndex>
copath(LeafIndex leaf, uint32_t leaf_count)
{
  std::vector<NodeIndex> result;
  if (leaf_count <= 1) {
    return result;
  }
  NodeIndex n = node_index(leaf);
  const NodeIndex r = root(leaf_count);
  while (n != r) {
    result.push_back(sibling(n));
    n = parent(n);
  }
  return result;
}

// The array layout is an in-order traversal, so the subtree rooted at node n
// with level l spans exactly the contiguous index range [n - (2^l - 1), n + (2^l - 1)].
constexpr bool
is_ancestor(NodeIndex ancestor, NodeIndex node)
{
  const NodeIndex span = (NodeIndex(1) << level(ancestor)) - 1;
  return node >= ancestor - span && node <= ancestor + span;
}

inline bool
in_path(NodeIndex node, LeafIndex leaf, uint32_t leaf_count)
{
  if (node == node_index(leaf)) {
    return true;
  }
  for (const auto n : direct_path(leaf, leaf_count)) {
    if (n == node) {
      return true;
    }
  }
  return false;
}

} // namespace cgkasim::tree_math
