#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "georel/clustering.hpp"
#include "georel/dataset.hpp"

namespace georel {

/// What a recommendation ranks: DBSCAN clusters of point-geotagged items, or
/// the raw items themselves when they are well-defined POIs.
enum class UnitMode { Item, Cluster };

struct UnitOptions {
  UnitMode mode{UnitMode::Cluster};
  double max_radius_km{1.0};
  std::size_t min_points{3};
};

struct Unit {
  std::string label;
  ContextId context;
  Coordinate centroid;
};

/// Maps (context, item) to recommendation units. Every unit belongs to exactly
/// one context; in cluster mode the units of a context are its DBSCAN clusters
/// over the context's items, in item mode they are the items themselves.
class UnitMap {
 public:
  UnitMap() = default;

  static UnitMap build(const Dataset& d, const UnitOptions& options) {
    UnitMap m;
    m.options_ = options;
    m.by_context_.resize(d.num_contexts());
    m.context_units_.resize(d.num_contexts());
    m.clusterings_.resize(d.num_contexts());
    for (std::size_t gi = 0; gi < d.num_contexts(); ++gi) {
      const ContextId g{gi};
      const auto items = d.items_in(g);
      const std::string& gname = d.vocabulary().contexts.name(g);
      auto& lookup = m.by_context_[gi];
      if (options.mode == UnitMode::Item) {
        for (ItemId i : items) {
          const UnitId u{m.units_.size()};
          m.units_.push_back({d.vocabulary().items.name(i), g, d.location(i)});
          m.context_units_[gi].push_back(u);
          lookup.emplace_back(i, u);
        }
        continue;
      }
      std::vector<ClusterPoint> points;
      points.reserve(items.size());
      for (ItemId i : items) points.push_back({i, d.location(i)});
      m.clusterings_[gi] = dbscan(points, options.max_radius_km, options.min_points);
      const Clustering& c = m.clusterings_[gi];
      const std::size_t base = m.units_.size();
      for (std::size_t k = 0; k < c.size(); ++k) {
        const UnitId u{m.units_.size()};
        m.units_.push_back({gname + "/" + std::to_string(k), g, c.clusters()[k].centroid});
        m.context_units_[gi].push_back(u);
      }
      for (const auto& p : c.points())
        if (auto k = c.item_to_unit(p.item)) lookup.emplace_back(p.item, UnitId{base + k->index()});
    }
    return m;
  }

  const UnitOptions& options() const { return options_; }
  UnitMode mode() const { return options_.mode; }
  std::size_t size() const { return units_.size(); }
  const Unit& unit(UnitId u) const { return units_.at(u.index()); }

  std::span<const UnitId> units_in(ContextId g) const {
    if (g.index() >= context_units_.size()) return {};
    return context_units_[g.index()];
  }

  /// Units of a context occupy one contiguous id range: [first, first + count).
  std::pair<std::size_t, std::size_t> unit_range(ContextId g) const {
    const auto us = units_in(g);
    if (us.empty()) return {0, 0};
    return {us.front().index(), us.size()};
  }

  /// Unit of item `i` within context `g`; absent for noise or unknown items.
  std::optional<UnitId> unit_of(ContextId g, ItemId i) const {
    if (g.index() >= by_context_.size()) return std::nullopt;
    const auto& lookup = by_context_[g.index()];
    auto it = std::lower_bound(lookup.begin(), lookup.end(), i,
                               [](const auto& e, ItemId x) { return e.first < x; });
    if (it == lookup.end() || it->first != i) return std::nullopt;
    return it->second;
  }

  /// Unit a held-out selection belongs to: its own unit when the item is
  /// known here; otherwise, in cluster mode, the cluster whose core points
  /// reach `where`.
  std::optional<UnitId> match(ContextId g, ItemId i, const Coordinate& where) const {
    if (auto u = unit_of(g, i)) return u;
    if (options_.mode != UnitMode::Cluster || g.index() >= clusterings_.size())
      return std::nullopt;
    auto k = clusterings_[g.index()].locate(where);
    if (!k) return std::nullopt;
    return context_units_[g.index()].at(k->index());
  }

  /// Clustering of context `g` (empty in item mode).
  const Clustering& clustering(ContextId g) const { return clusterings_.at(g.index()); }

 private:
  UnitOptions options_;
  std::vector<Unit> units_;
  std::vector<std::vector<UnitId>> context_units_;
  std::vector<std::vector<std::pair<ItemId, UnitId>>> by_context_;
  std::vector<Clustering> clusterings_;
};

}  // namespace georel
