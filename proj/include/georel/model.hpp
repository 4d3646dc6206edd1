#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "georel/dataset.hpp"
#include "georel/graph.hpp"
#include "georel/units.hpp"

namespace georel {

struct UnitCount {
  UnitId unit;
  std::uint32_t count;  // events behind this unit
};

/// Everything a query reads, derived from one (training) dataset: the units,
/// the relational graph and each node's selections expressed as units.
class Model {
 public:
  Model(Dataset dataset, const UnitOptions& options)
      : dataset_(std::move(dataset)),
        units_(UnitMap::build(dataset_, options)),
        graph_(RelationalGraph::build(dataset_)) {
    node_offset_.reserve(graph_.num_nodes() + 1);
    node_offset_.push_back(0);
    std::vector<UnitCount> scratch;
    for (NodeRef v : graph_.nodes()) {
      scratch.clear();
      for (const Triple& t : dataset_.triples_of(v.user, v.context))
        if (auto u = units_.unit_of(v.context, t.item)) scratch.push_back({*u, t.count});
      std::sort(scratch.begin(), scratch.end(),
                [](const UnitCount& a, const UnitCount& b) { return a.unit < b.unit; });
      for (const auto& uc : scratch) {
        if (node_offset_.back() < selections_.size() && selections_.back().unit == uc.unit)
          selections_.back().count += uc.count;
        else
          selections_.push_back(uc);
      }
      node_offset_.push_back(selections_.size());
    }
    popularity_.assign(units_.size(), 0);
    for (const auto& s : selections_) ++popularity_[s.unit.index()];
  }

  const Dataset& dataset() const { return dataset_; }
  const UnitMap& units() const { return units_; }
  const RelationalGraph& graph() const { return graph_; }

  /// units(I_{u,g}) of a graph node, ascending, noise dropped.
  std::span<const UnitCount> selections(std::size_t node) const {
    return std::span<const UnitCount>(selections_)
        .subspan(node_offset_[node], node_offset_[node + 1] - node_offset_[node]);
  }

  /// Empty for virtual nodes.
  std::span<const UnitCount> selections(NodeRef v) const {
    if (auto idx = graph_.node_index(v)) return selections(*idx);
    return {};
  }

  /// A node is cold-start when the user has no items at all in its context.
  bool is_cold_start(NodeRef v) const {
    return dataset_.items_of(v.user, v.context).empty();
  }

  /// Distinct users whose selections include `u`.
  std::size_t popularity(UnitId u) const {
    return u.index() < popularity_.size() ? popularity_[u.index()] : 0;
  }

 private:
  Dataset dataset_;
  UnitMap units_;
  RelationalGraph graph_;
  std::vector<std::size_t> node_offset_;
  std::vector<UnitCount> selections_;
  std::vector<std::size_t> popularity_;
};

}  // namespace georel
