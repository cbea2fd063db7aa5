#include "cgkasim/ratchet_tree.hpp"

#include "cgkasim/errors.hpp"

namespace cgkasim {

using namespace tree_math;

RatchetTree
RatchetTree::single(const LeafNode& leaf)
{
  RatchetTree tree;
  tree._capacity = 1;
  tree._nodes.resize(1);
  tree._nodes[0].leaf = leaf;
  return tree;
}

uint32_t
RatchetTree::occupied() const
{
  uint32_t count = 0;
  for (LeafIndex i = 0; i < _capacity; i++) {
    if (leaf_occupied(i)) {
      count++;
    }
  }
  return count;
}

bool
RatchetTree::leaf_occupied(LeafIndex leaf) const
{
  return leaf < _capacity && _nodes[node_index(leaf)].leaf.has_value();
}

const LeafNode*
RatchetTree::leaf_node(LeafIndex leaf) const
{
  if (!leaf_occupied(leaf)) {
    return nullptr;
  }
  return &*_nodes[node_index(leaf)].leaf;
}

const Bytes*
RatchetTree::public_key(NodeIndex node) const
{
  if (node >= _nodes.size()) {
    return nullptr;
  }
  if (is_leaf(node)) {
    const auto& leaf = _nodes[node].leaf;
    return leaf ? &leaf->kem_public_key : nullptr;
  }
  const auto& key = _nodes[node].key;
  return key ? &*key : nullptr;
}

std::optional<LeafIndex>
RatchetTree::leftmost_blank() const
{
  for (LeafIndex i = 0; i < _capacity; i++) {
    if (!leaf_occupied(i)) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<LeafIndex>
RatchetTree::find(const LeafNode& leaf) const
{
  for (LeafIndex i = 0; i < _capacity; i++) {
    const auto* node = leaf_node(i);
    if (node != nullptr && *node == leaf) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<LeafIndex>
RatchetTree::find_identity(const std::string& identity) const
{
  for (LeafIndex i = 0; i < _capacity; i++) {
    const auto* node = leaf_node(i);
    if (node != nullptr && node->identity == identity) {
      return i;
    }
  }
  return std::nullopt;
}

std::vector<LeafIndex>
RatchetTree::member_leaves() const
{
  std::vector<LeafIndex> leaves;
  for (LeafIndex i = 0; i < _capacity; i++) {
    if (leaf_occupied(i)) {
      leaves.push_back(i);
    }
  }
  return leaves;
}

void
RatchetTree::grow()
{
  if (_capacity == 0) {
    _capacity = 1;
    _nodes.resize(1);
    return;
  }
  // Doubling appends nodes; existing indices keep their meaning, so held
  // private keys remain valid.
  _capacity *= 2;
  _nodes.resize(node_width(_capacity));
}

LeafIndex
RatchetTree::add_leaf(const LeafNode& leaf)
{
  auto slot = leftmost_blank();
  if (!slot) {
    grow();
    slot = leftmost_blank();
  }
  _nodes[node_index(*slot)].leaf = leaf;
  blank_direct_path(*slot);
  return *slot;
}

void
RatchetTree::remove_leaf(LeafIndex leaf)
{
  if (!leaf_occupied(leaf)) {
    throw InvalidParameterError("cannot remove a blank leaf");
  }
  _nodes[node_index(leaf)].leaf.reset();
  blank_direct_path(leaf);
}

void
RatchetTree::update_leaf(LeafIndex leaf, const LeafNode& node)
{
  if (!leaf_occupied(leaf)) {
    throw InvalidParameterError("cannot update a blank leaf");
  }
  _nodes[node_index(leaf)].leaf = node;
  blank_direct_path(leaf);
}

void
RatchetTree::set_node_key(NodeIndex node, const Bytes& key)
{
  if (node >= _nodes.size() || is_leaf(node)) {
    throw InvalidParameterError("set_node_key expects an internal node");
  }
  _nodes[node].key = key;
}

void
RatchetTree::blank_direct_path(LeafIndex leaf)
{
  for (const auto node : direct_path(leaf, _capacity)) {
    _nodes[node].key.reset();
  }
}

std::vector<NodeIndex>
RatchetTree::install_update_path(LeafIndex committer, const UpdatePath& path)
{
  if (committer >= _capacity) {
    throw BadTree("update path committer outside the tree");
  }
  _nodes[node_index(committer)].leaf = path.leaf_node;
  blank_direct_path(committer);
  const auto filtered = filtered_direct_path(committer);
  if (filtered.size() != path.nodes.size()) {
    throw BadTree("update path length does not match the tree");
  }
  for (size_t i = 0; i < filtered.size(); i++) {
    _nodes[filtered[i]].key = path.nodes[i].public_key;
  }
  return filtered;
}

std::vector<NodeIndex>
RatchetTree::resolution(NodeIndex node) const
{
  if (node >= _nodes.size()) {
    throw InvalidParameterError("node index outside the tree");
  }
  if (public_key(node) != nullptr) {
    return { node };
  }
  if (is_leaf(node)) {
    return {};
  }
  auto left = resolution(left_child(node));
  const auto right = resolution(right_child(node));
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

std::vector<NodeIndex>
RatchetTree::filtered_direct_path(LeafIndex leaf) const
{
  std::vector<NodeIndex> filtered;
  NodeIndex current = node_index(leaf);
  for (const auto node : direct_path(leaf, _capacity)) {
    const NodeIndex left = left_child(node);
    const NodeIndex copath_child = (left == current) ? right_child(node) : left;
    if (!resolution(copath_child).empty()) {
      filtered.push_back(node);
    }
    current = node;
  }
  return filtered;
}

Bytes
RatchetTree::subtree_hash(const CryptoProvider& provider, NodeIndex node) const
{
  Writer w;
  if (is_leaf(node)) {
    w.str("tree-leaf");
    w.u32(leaf_index(node));
    const auto& leaf = _nodes[node].leaf;
    w.boolean(leaf.has_value());
    if (leaf) {
      leaf->encode(w);
    }
  } else {
    w.str("tree-parent");
    const auto& key = _nodes[node].key;
    w.boolean(key.has_value());
    if (key) {
      w.bytes(*key);
    }
    w.bytes(subtree_hash(provider, left_child(node)));
    w.bytes(subtree_hash(provider, right_child(node)));
  }
  return provider.hash(w.out());
}

Bytes
RatchetTree::tree_hash(const CryptoProvider& provider) const
{
  if (_capacity == 0) {
    return provider.hash(from_ascii("tree-empty"));
  }
  return subtree_hash(provider, root(_capacity));
}

void
RatchetTree::validate(const CryptoProvider& provider) const
{
  if (_capacity == 0 || !is_power_of_two(_capacity)) {
    throw BadTree("tree capacity must be a power of two");
  }
  if (_nodes.size() != node_width(_capacity)) {
    throw BadTree("tree node count does not match capacity");
  }
  if (occupied() == 0) {
    throw BadTree("tree has no members");
  }
  for (NodeIndex n = 0; n < _nodes.size(); n++) {
    if (is_leaf(n)) {
      if (_nodes[n].key.has_value()) {
        throw BadTree("leaf position carries an internal key");
      }
      const auto& leaf = _nodes[n].leaf;
      if (leaf && !leaf->valid(provider)) {
        throw BadTree("leaf node signature is invalid");
      }
    } else if (_nodes[n].leaf.has_value()) {
      throw BadTree("internal position carries a leaf");
    }
  }
  // One leaf per identity keeps removals and policy decisions unambiguous.
  for (LeafIndex i = 0; i < _capacity; i++) {
    const auto* a = leaf_node(i);
    if (a == nullptr) {
      continue;
    }
    for (LeafIndex j = i + 1; j < _capacity; j++) {
      const auto* b = leaf_node(j);
      if (b != nullptr && b->identity == a->identity) {
        throw BadTree("duplicate identity in tree");
      }
    }
  }
}

void
RatchetTree::encode(Writer& w) const
{
  w.u32(_capacity);
  for (const auto& node : _nodes) {
    if (node.leaf) {
      w.u8(2);
      node.leaf->encode(w);
    } else if (node.key) {
      w.u8(1);
      w.bytes(*node.key);
    } else {
      w.u8(0);
    }
  }
}

RatchetTree
RatchetTree::decode(Reader& r)
{
  RatchetTree tree;
  tree._capacity = r.u32();
  if (tree._capacity == 0 || !is_power_of_two(tree._capacity)) {
    throw DecodeError("tree capacity must be a power of two");
  }
  if (tree._capacity > (1u << 20)) {
    throw DecodeError("tree capacity implausibly large");
  }
  tree._nodes.resize(node_width(tree._capacity));
  for (NodeIndex n = 0; n < tree._nodes.size(); n++) {
    const uint8_t tag = r.u8();
    switch (tag) {
      case 0:
        break;
      case 1:
        if (is_leaf(n)) {
          throw DecodeError("bare key at leaf position");
        }
        tree._nodes[n].key = r.bytes();
        break;
      case 2:
        if (!is_leaf(n)) {
          throw DecodeError("leaf node at internal position");
        }
        tree._nodes[n].leaf = LeafNode::decode(r);
        break;
      default:
        throw DecodeError("unknown tree node tag");
    }
  }
  return tree;
}

} // namespace cgkasim
