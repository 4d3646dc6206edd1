#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "georel/model.hpp"

namespace georel {

/// How node popularity turns into an information weight.
enum class InformationMode {
  Inverse,     // 1 / users
  LogInverse,  // log(1 + active users / users)
};

struct PartonomyNode {
  std::string id;
  std::string name;
  std::size_t layer{0};  // 0 = leaves
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // ascending
  std::optional<UnitId> unit;    // bound leaf
  std::string cluster_id;        // leaf binding requested by the source file
};

/// Part-of forest over geographic regions (country > state > city > cluster)
/// carrying an information weight per node.
class Partonomy {
 public:
  NodeId add_node(std::string id, std::string name, std::size_t layer,
                  std::optional<NodeId> parent = std::nullopt) {
    if (index_.contains(id)) throw std::invalid_argument("duplicate partonomy node '" + id + "'");
    if (parent) {
      if (parent->index() >= nodes_.size())
        throw std::invalid_argument("unknown parent for partonomy node '" + id + "'");
      if (nodes_[parent->index()].layer != layer + 1)
        throw std::invalid_argument("partonomy node '" + id +
                                    "' must sit exactly one layer below its parent");
    }
    const NodeId n{nodes_.size()};
    nodes_.push_back({std::move(id), std::move(name), layer, parent, {}, std::nullopt, {}});
    index_.emplace(nodes_.back().id, n);
    if (parent) nodes_[parent->index()].children.push_back(n);
    information_.push_back(0.0);
    max_layer_ = std::max(max_layer_, layer);
    layer_sum_valid_ = false;
    return n;
  }

  /// Reads a forest of `{id, name, layer, children: [...]}` objects. A leaf
  /// may carry `cluster_id` naming the unit it stands for.
  static Partonomy from_json(const nlohmann::json& j) {
    Partonomy p;
    auto visit = [&p](auto&& self, const nlohmann::json& obj,
                      std::optional<NodeId> parent) -> void {
      if (!obj.is_object()) throw std::invalid_argument("partonomy node must be an object");
      const auto layer = obj.at("layer").get<long long>();
      if (layer < 0) throw std::invalid_argument("partonomy layer must be non-negative");
      std::string id = obj.contains("id") ? obj.at("id").get<std::string>()
                                          : obj.at("cluster_id").get<std::string>();
      const NodeId n = p.add_node(id, obj.value("name", id), static_cast<std::size_t>(layer), parent);
      if (obj.contains("cluster_id")) p.nodes_[n.index()].cluster_id = obj.at("cluster_id").get<std::string>();
      if (obj.contains("children"))
        for (const auto& child : obj.at("children")) self(self, child, n);
    };
    if (j.is_array()) {
      for (const auto& root : j) visit(visit, root, std::nullopt);
    } else {
      visit(visit, j, std::nullopt);
    }
    return p;
  }

  nlohmann::json to_json() const {
    auto emit = [this](auto&& self, NodeId n) -> nlohmann::json {
      const auto& node = nodes_[n.index()];
      nlohmann::json obj{{"id", node.id}, {"name", node.name}, {"layer", node.layer}};
      if (!node.cluster_id.empty()) obj["cluster_id"] = node.cluster_id;
      if (!node.children.empty()) {
        obj["children"] = nlohmann::json::array();
        for (NodeId c : node.children) obj["children"].push_back(self(self, c));
      }
      return obj;
    };
    nlohmann::json forest = nlohmann::json::array();
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].parent) forest.push_back(emit(emit, NodeId{i}));
    return forest;
  }

  /// Binds every unit to a leaf: a declared `cluster_id` leaf when one
  /// matches the unit label, otherwise a new leaf under the layer-1 node whose
  /// id equals the unit's context id. Units with no such node stay unbound.
  void attach_units(const UnitMap& units, const Vocabulary& vocab) {
    unit_node_.assign(units.size(), NodeId{});
    std::unordered_map<std::string, NodeId> declared;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].cluster_id.empty()) declared.emplace(nodes_[i].cluster_id, NodeId{i});
    for (std::size_t ui = 0; ui < units.size(); ++ui) {
      const UnitId u{ui};
      const Unit& unit = units.unit(u);
      if (auto it = declared.find(unit.label); it != declared.end()) {
        nodes_[it->second.index()].unit = u;
        unit_node_[ui] = it->second;
        continue;
      }
      auto parent = find(vocab.contexts.name(unit.context));
      if (!parent || nodes_[parent->index()].layer != 1) continue;
      std::string id = unit.label;
      if (index_.contains(id)) id = "unit:" + id;
      const NodeId leaf = add_node(id, unit.label, 0, parent);
      nodes_[leaf.index()].unit = u;
      unit_node_[ui] = leaf;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t max_layer() const { return max_layer_; }
  const PartonomyNode& node(NodeId n) const { return nodes_.at(n.index()); }

  std::optional<NodeId> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<NodeId> unit_node(UnitId u) const {
    if (u.index() >= unit_node_.size() || !unit_node_[u.index()].valid()) return std::nullopt;
    return unit_node_[u.index()];
  }

  double information(NodeId n) const { return information_.at(n.index()); }
  void set_information(NodeId n, double value) {
    information_.at(n.index()) = value;
    layer_sum_valid_ = false;
  }

  /// Sum of information over the nodes of `layer`.
  double layer_information(std::size_t layer) const {
    if (!layer_sum_valid_) {
      layer_sum_.assign(max_layer_ + 1, 0.0);
      for (std::size_t i = 0; i < nodes_.size(); ++i) layer_sum_[nodes_[i].layer] += information_[i];
      layer_sum_valid_ = true;
    }
    return layer < layer_sum_.size() ? layer_sum_[layer] : 0.0;
  }

 private:
  std::vector<PartonomyNode> nodes_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<double> information_;
  std::vector<NodeId> unit_node_;
  std::size_t max_layer_{0};
  mutable std::vector<double> layer_sum_;
  mutable bool layer_sum_valid_{false};
};

/// For each user, the partonomy nodes whose subtree holds one of the user's
/// selections, grouped by parent so that the touched children of a node form
/// a contiguous range.
class Footprints {
 public:
  Footprints() = default;

  /// `touches` lists (user, node) pairs; each node's ancestors are touched too.
  Footprints(const Partonomy& p, std::size_t num_users,
             std::span<const std::pair<UserId, NodeId>> touches)
      : users_per_node_(p.size(), 0) {
    std::vector<std::vector<NodeId>> per_user(num_users);
    for (const auto& [user, node] : touches) {
      std::optional<NodeId> n = node;
      while (n) {
        per_user.at(user.index()).push_back(*n);
        n = p.node(*n).parent;
      }
    }
    user_offset_.push_back(0);
    group_offset_.push_back(0);
    for (auto& nodes : per_user) {
      std::sort(nodes.begin(), nodes.end());
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
      for (NodeId n : nodes) ++users_per_node_[n.index()];
      auto parent_key = [&p](NodeId n) {
        auto par = p.node(n).parent;
        return par ? par->value : NodeId::kInvalid;
      };
      std::stable_sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) {
        return parent_key(a) < parent_key(b);
      });
      const std::size_t base = touched_.size();
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        touched_.push_back(nodes[k]);
        const auto par = p.node(nodes[k]).parent;
        if (!par) continue;
        if (groups_.size() > group_offset_.back() && groups_.back().parent == *par) {
          ++groups_.back().end;
        } else {
          groups_.push_back({*par, base + k, base + k + 1});
        }
      }
      user_offset_.push_back(touched_.size());
      group_offset_.push_back(groups_.size());
    }
  }

  /// Footprints of every training user: a user touches the leaf of each
  /// selected unit, or the context node itself for selections in no unit.
  static Footprints build(const Partonomy& p, const Model& m) {
    const Dataset& d = m.dataset();
    std::vector<std::pair<UserId, NodeId>> touches;
    std::vector<std::optional<NodeId>> context_node(d.num_contexts());
    for (std::size_t g = 0; g < d.num_contexts(); ++g)
      context_node[g] = p.find(d.vocabulary().contexts.name(ContextId{g}));
    for (const Triple& t : d.triples()) {
      std::optional<NodeId> n;
      if (auto u = m.units().unit_of(t.context, t.item)) n = p.unit_node(*u);
      if (!n) n = context_node[t.context.index()];
      if (n) touches.emplace_back(t.user, *n);
    }
    return Footprints(p, d.num_users(), touches);
  }

  struct Group {
    NodeId parent;
    std::size_t begin;
    std::size_t end;
  };

  /// Child groups of `u`, ascending by parent.
  std::span<const Group> groups(UserId u) const {
    if (u.index() + 1 >= group_offset_.size()) return {};
    return std::span<const Group>(groups_).subspan(
        group_offset_[u.index()], group_offset_[u.index() + 1] - group_offset_[u.index()]);
  }

  std::span<const NodeId> children_in(const Group& g) const {
    return std::span<const NodeId>(touched_).subspan(g.begin, g.end - g.begin);
  }

  /// Children of `g` whose subtree holds a selection of `u`, ascending.
  std::span<const NodeId> children_touched(UserId u, NodeId g) const {
    const auto gs = groups(u);
    auto it = std::lower_bound(gs.begin(), gs.end(), g,
                               [](const Group& x, NodeId n) { return x.parent < n; });
    if (it == gs.end() || it->parent != g) return {};
    return children_in(*it);
  }

  std::size_t users_touching(NodeId n) const {
    return n.index() < users_per_node_.size() ? users_per_node_[n.index()] : 0;
  }

  std::size_t num_users() const { return user_offset_.empty() ? 0 : user_offset_.size() - 1; }

  /// Users with at least one touched node.
  std::size_t active_users() const {
    std::size_t n = 0;
    for (std::size_t u = 0; u + 1 < user_offset_.size(); ++u)
      if (user_offset_[u + 1] > user_offset_[u]) ++n;
    return n;
  }

 private:
  std::vector<NodeId> touched_;
  std::vector<std::size_t> user_offset_;
  std::vector<Group> groups_;
  std::vector<std::size_t> group_offset_;
  std::vector<std::size_t> users_per_node_;
};

/// information(c) from the number of users active in c's subtree; nodes no
/// user touched get 0.
inline void build_information(Partonomy& p, const Footprints& f,
                              InformationMode mode = InformationMode::Inverse) {
  const double active = static_cast<double>(f.active_users());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const NodeId n{i};
    const auto users = static_cast<double>(f.users_touching(n));
    double info = 0.0;
    if (users > 0.0)
      info = mode == InformationMode::Inverse ? 1.0 / users : std::log1p(active / users);
    p.set_information(n, info);
  }
}

namespace detail {

inline double overlap_ratio(const Partonomy& p, std::span<const NodeId> a,
                            std::span<const NodeId> b) {
  double shared = 0.0;
  double total = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      total += p.information(a[i++]);
    } else if (i == a.size() || b[j] < a[i]) {
      total += p.information(b[j++]);
    } else {
      const double w = p.information(a[i]);
      shared += w;
      total += w;
      ++i;
      ++j;
    }
  }
  return total > 0.0 ? shared / total : 0.0;
}

}  // namespace detail

/// Information-weighted Jaccard overlap of the children of `g` in which each
/// user has selections.
inline double sim_inf(const Partonomy& p, const Footprints& f, UserId a, UserId b, NodeId g) {
  return detail::overlap_ratio(p, f.children_touched(a, g), f.children_touched(b, g));
}

/// Information-weighted mean of sim_inf over the nodes of `layer`.
inline double sim_two_layer(const Partonomy& p, const Footprints& f, UserId a, UserId b,
                            std::size_t layer) {
  if (layer < 1 || layer > p.max_layer())
    throw std::out_of_range("partonomy layer " + std::to_string(layer) + " has no layer below it");
  const double denom = p.layer_information(layer);
  if (!(denom > 0.0)) return 0.0;
  const auto ga = f.groups(a);
  const auto gb = f.groups(b);
  double num = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ga.size() && j < gb.size()) {
    if (ga[i].parent < gb[j].parent) {
      ++i;
    } else if (gb[j].parent < ga[i].parent) {
      ++j;
    } else {
      const NodeId g = ga[i].parent;
      if (p.node(g).layer == layer)
        num += detail::overlap_ratio(p, f.children_in(ga[i]), f.children_in(gb[j])) *
               p.information(g);
      ++i;
      ++j;
    }
  }
  return std::clamp(num / denom, 0.0, 1.0);
}

}  // namespace georel
