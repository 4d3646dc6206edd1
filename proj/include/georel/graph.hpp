#pragma once

#include <algorithm>
#include <optional>
#include <ranges>
#include <span>
#include <vector>

#include "georel/dataset.hpp"

namespace georel {

/// A vertex (u, g) of the relational graph.
struct NodeRef {
  UserId user;
  ContextId context;

  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

/// Graph over distinct (user, context) pairs of S. Two nodes are adjacent iff
/// they share a context, so each context is a clique and edges are kept
/// implicitly as per-context member lists.
class RelationalGraph {
 public:
  struct Member {
    UserId user;
    std::size_t node;  // index into nodes()
  };

  RelationalGraph() = default;

  static RelationalGraph build(const Dataset& d) {
    RelationalGraph g;
    g.members_.resize(d.num_contexts());
    g.user_offset_.assign(d.num_users() + 1, 0);
    for (std::size_t u = 0; u < d.num_users(); ++u) {
      const UserId user{u};
      for (ContextId c : d.contexts_of(user)) {
        g.members_[c.index()].push_back({user, g.nodes_.size()});
        g.nodes_.push_back({user, c});
      }
      g.user_offset_[u + 1] = g.nodes_.size();
    }
    return g;
  }

  std::span<const NodeRef> nodes() const { return nodes_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  /// Nodes of context `g`, ascending by user.
  std::span<const Member> members(ContextId g) const {
    if (g.index() >= members_.size()) return {};
    return members_[g.index()];
  }

  bool has_context(ContextId g) const { return !members(g).empty(); }

  /// Index of `v` in nodes(); absent for virtual (cold-start) nodes.
  std::optional<std::size_t> node_index(NodeRef v) const {
    if (v.user.index() + 1 >= user_offset_.size()) return std::nullopt;
    const auto first = nodes_.begin() + static_cast<std::ptrdiff_t>(user_offset_[v.user.index()]);
    const auto last = nodes_.begin() + static_cast<std::ptrdiff_t>(user_offset_[v.user.index() + 1]);
    auto it = std::lower_bound(first, last, v);
    if (it == last || *it != v) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  bool contains(NodeRef v) const { return node_index(v).has_value(); }

  /// Neighbors: every other node in v's context, ascending by user. `v` may be a
  /// virtual node that is not part of the graph.
  auto neighbors(NodeRef v) const {
    const ContextId g = v.context;
    return members(g) |
           std::views::filter([u = v.user](const Member& m) { return m.user != u; }) |
           std::views::transform([g](const Member& m) { return NodeRef{m.user, g}; });
  }

  std::vector<NodeRef> neighbor_list(NodeRef v) const {
    std::vector<NodeRef> out;
    for (NodeRef n : neighbors(v)) out.push_back(n);
    return out;
  }

 private:
  std::vector<NodeRef> nodes_;  // sorted by (user, context)
  std::vector<std::size_t> user_offset_;
  std::vector<std::vector<Member>> members_;
};

inline RelationalGraph build_graph(const Dataset& d) { return RelationalGraph::build(d); }

}  // namespace georel
