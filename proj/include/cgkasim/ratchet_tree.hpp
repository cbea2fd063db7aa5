#pragma once

#include "cgkasim/messages.hpp"
#include "cgkasim/tree_math.hpp"

#include <optional>
#include <vector>

namespace cgkasim {

// Public view of the group's ratchet tree: a complete binary tree whose leaf
// count is always a power of two. Leaves hold member leaf nodes; internal
// nodes hold bare KEM public keys. Blank nodes hold nothing. There are no
// partially-merged nodes: commits blank every node they do not re-key.
class RatchetTree
{
public:
  RatchetTree() = default;

  // A one-leaf tree holding the group creator.
  static RatchetTree single(const LeafNode& leaf);

  uint32_t capacity() const { return _capacity; }
  uint32_t occupied() const;

  bool leaf_occupied(LeafIndex leaf) const;
  const LeafNode* leaf_node(LeafIndex leaf) const;

  // KEM public key at a node, left blank-aware: for occupied leaves this is
  // the leaf node's key; returns nullptr for blank nodes.
  const Bytes* public_key(NodeIndex node) const;
  bool blank(NodeIndex node) const { return public_key(node) == nullptr; }

  std::optional<LeafIndex> leftmost_blank() const;
  std::optional<LeafIndex> find(const LeafNode& leaf) const;
  std::optional<LeafIndex> find_identity(const std::string& identity) const;

  // The members' leaf indices in ascending order.
  std::vector<LeafIndex> member_leaves() const;

  /// Mutation (used while applying proposals and update paths)

  // Place a leaf at the leftmost blank position, doubling the tree if full.
  // The new leaf's direct path is blanked. Returns the position used.
  LeafIndex add_leaf(const LeafNode& leaf);
  // Blank the leaf and its direct path.
  void remove_leaf(LeafIndex leaf);
  // Replace the leaf node in place and blank its direct path.
  void update_leaf(LeafIndex leaf, const LeafNode& node);

  void set_node_key(NodeIndex node, const Bytes& key);
  void blank_direct_path(LeafIndex leaf);

  // Install a committer's update path: replace the leaf node, blank the full
  // direct path, then set the new public keys on the filtered direct path.
  // Returns the filtered path the keys were installed on. Throws BadTree if
  // the path's node count does not match this tree.
  std::vector<NodeIndex> install_update_path(LeafIndex committer, const UpdatePath& path);

  /// Structure queries

  // The smallest set of non-blank nodes covering every member below `node`:
  // a non-blank node resolves to itself; a blank leaf to nothing; a blank
  // internal node to the concatenated resolutions of its children.
  std::vector<NodeIndex> resolution(NodeIndex node) const;

  // The committer's direct path minus nodes whose copath child resolves to
  // nothing (no one would be able to read a secret encrypted there).
  std::vector<NodeIndex> filtered_direct_path(LeafIndex leaf) const;

  // Structured hash over the whole tree (blank-aware, position-binding).
  Bytes tree_hash(const CryptoProvider& provider) const;

  // Structural and authentication checks; throws BadTree on violation.
  void validate(const CryptoProvider& provider) const;

  void encode(Writer& w) const;
  static RatchetTree decode(Reader& r);

  friend bool operator==(const RatchetTree& lhs, const RatchetTree& rhs) = default;

private:
  struct Node
  {
    // Internal nodes: bare KEM key. Leaves: key lives inside the leaf node.
    std::optional<Bytes> key;
    std::optional<LeafNode> leaf;

    friend bool operator==(const Node&, const Node&) = default;
  };

  void grow();
  Bytes subtree_hash(const CryptoProvider& provider, NodeIndex node) const;

  uint32_t _capacity = 0;
  std::vector<Node> _nodes;
};

} // namespace cgkasim
