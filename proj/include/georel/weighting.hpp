#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "georel/geo.hpp"
#include "georel/model.hpp"
#include "georel/partonomy.hpp"

namespace georel {

enum class Scheme { MostPopular, Cosine, Geo, IntraCluster, TwoLayer, CfTl };

inline std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::MostPopular: return "mp";
    case Scheme::Cosine: return "cf";
    case Scheme::Geo: return "geo";
    case Scheme::IntraCluster: return "ic";
    case Scheme::TwoLayer: return "tl";
    case Scheme::CfTl: return "cf-tl";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::MostPopular, Scheme::Cosine, Scheme::Geo, Scheme::IntraCluster,
                   Scheme::TwoLayer, Scheme::CfTl})
    if (scheme_name(s) == name) return s;
  return std::nullopt;
}

/// Which selections make up a cosine profile vector.
enum class CosineScope { Context, All };
/// Profile components: presence (1) or retained event counts.
enum class ProfileMode { Binary, Count };

/// Edge weight w(v, v') of the relational graph. Each scheme yields one
/// recommender when plugged into `recommend`. Implementations keep references
/// to the structures they were built from.
class EdgeWeight {
 public:
  virtual ~EdgeWeight() = default;
  virtual Scheme scheme() const = 0;
  virtual bool symmetric() const { return true; }
  /// Weight of the edge from query node `v` to neighbor `u`, in [0, 1].
  virtual double operator()(NodeRef v, NodeRef u) const = 0;
};

class UniformWeight final : public EdgeWeight {
 public:
  Scheme scheme() const override { return Scheme::MostPopular; }
  double operator()(NodeRef, NodeRef) const override { return 1.0; }
};

class CosineWeight final : public EdgeWeight {
 public:
  struct Component {
    UnitId unit;
    double value;
  };

  CosineWeight(const Model& model, CosineScope scope, ProfileMode mode = ProfileMode::Binary)
      : model_(model), scope_(scope) {
    auto value = [mode](const UnitCount& uc) {
      return mode == ProfileMode::Binary ? 1.0 : static_cast<double>(uc.count);
    };
    const auto nodes = model.graph().nodes();
    const std::size_t n_profiles =
        scope == CosineScope::All ? model.dataset().num_users() : nodes.size();
    offset_.assign(n_profiles + 1, 0);
    norm_.assign(n_profiles, 0.0);
    // nodes are sorted by user, so a user's all-context profile is the
    // concatenation of its nodes' selections; units never span contexts
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::size_t slot = scope == CosineScope::All ? nodes[k].user.index() : k;
      for (const auto& uc : model.selections(k)) {
        profile_.push_back({uc.unit, value(uc)});
        norm_[slot] += value(uc) * value(uc);
      }
      offset_[slot + 1] = profile_.size();
    }
    for (std::size_t s = 1; s <= n_profiles; ++s) offset_[s] = std::max(offset_[s], offset_[s - 1]);
    if (scope == CosineScope::All) {
      for (std::size_t s = 0; s < n_profiles; ++s)
        std::sort(profile_.begin() + static_cast<std::ptrdiff_t>(offset_[s]),
                  profile_.begin() + static_cast<std::ptrdiff_t>(offset_[s + 1]),
                  [](const Component& a, const Component& b) { return a.unit < b.unit; });
    }
    for (auto& n : norm_) n = std::sqrt(n);
  }

  Scheme scheme() const override { return Scheme::Cosine; }

  double operator()(NodeRef v, NodeRef u) const override {
    const auto a = slot(v);
    const auto b = slot(u);
    if (!a || !b || norm_[*a] == 0.0 || norm_[*b] == 0.0) return 0.0;
    const auto pa = profile(*a);
    const auto pb = profile(*b);
    double dot = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < pa.size() && j < pb.size()) {
      if (pa[i].unit < pb[j].unit) {
        ++i;
      } else if (pb[j].unit < pa[i].unit) {
        ++j;
      } else {
        dot += pa[i++].value * pb[j++].value;
      }
    }
    return std::clamp(dot / (norm_[*a] * norm_[*b]), 0.0, 1.0);
  }

  std::span<const Component> profile(std::size_t slot) const {
    return std::span<const Component>(profile_).subspan(offset_[slot],
                                                        offset_[slot + 1] - offset_[slot]);
  }

 private:
  std::optional<std::size_t> slot(NodeRef v) const {
    if (scope_ == CosineScope::All) {
      if (v.user.index() >= norm_.size()) return std::nullopt;
      return v.user.index();
    }
    return model_.graph().node_index(v);
  }

  const Model& model_;
  CosineScope scope_;
  std::vector<Component> profile_;
  std::vector<std::size_t> offset_;
  std::vector<double> norm_;
};

/// 1 - d(centroid_u, centroid_u') / d_max of the shared context, where each
/// centroid averages the user's item coordinates in that context.
class GeoWeight final : public EdgeWeight {
 public:
  explicit GeoWeight(const Model& model) : model_(model) {
    const Dataset& d = model.dataset();
    d_max_.resize(d.num_contexts());
    for (std::size_t g = 0; g < d.num_contexts(); ++g) {
      try {
        d_max_[g] = georel::d_max(d.context(ContextId{g}).region);
      } catch (const std::invalid_argument&) {
        d_max_[g] = std::nullopt;
      }
    }
    std::vector<Coordinate> pts;
    for (NodeRef v : model.graph().nodes()) {
      pts.clear();
      for (ItemId i : d.items_of(v.user, v.context)) pts.push_back(d.location(i));
      centroid_.push_back(centroid(pts));
    }
  }

  Scheme scheme() const override { return Scheme::Geo; }

  double operator()(NodeRef v, NodeRef u) const override {
    const auto& dmax = d_max_.at(v.context.index());
    const auto a = model_.graph().node_index(v);
    const auto b = model_.graph().node_index(u);
    if (!dmax || !a || !b || v.context != u.context) return 0.0;
    return std::clamp(1.0 - haversine_km(centroid_[*a], centroid_[*b]) / *dmax, 0.0, 1.0);
  }

 private:
  const Model& model_;
  std::vector<std::optional<double>> d_max_;
  std::vector<Coordinate> centroid_;  // by node
};

/// Geographic similarity evaluated inside each unit both users selected in,
/// summed and divided by the number of units of the context.
class IntraClusterWeight final : public EdgeWeight {
 public:
  /// `unit_d_max_km` defaults to twice the clustering radius.
  IntraClusterWeight(const Model& model, std::optional<double> unit_d_max_km = std::nullopt)
      : model_(model),
        d_max_(unit_d_max_km.value_or(2.0 * model.units().options().max_radius_km)) {
    if (!(d_max_ > 0.0)) throw std::invalid_argument("intra-cluster d_max must be positive");
    const Dataset& d = model.dataset();
    offset_.push_back(0);
    std::vector<std::pair<UnitId, Coordinate>> sums;
    std::vector<std::size_t> counts;
    for (NodeRef v : model.graph().nodes()) {
      sums.clear();
      for (ItemId i : d.items_of(v.user, v.context))
        if (auto u = model.units().unit_of(v.context, i)) sums.emplace_back(*u, d.location(i));
      std::stable_sort(sums.begin(), sums.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t k = 0; k < sums.size();) {
        std::size_t e = k;
        std::vector<Coordinate> pts;
        while (e < sums.size() && sums[e].first == sums[k].first) pts.push_back(sums[e++].second);
        entries_.push_back({sums[k].first, centroid(pts)});
        k = e;
      }
      offset_.push_back(entries_.size());
    }
  }

  Scheme scheme() const override { return Scheme::IntraCluster; }

  double operator()(NodeRef v, NodeRef u) const override {
    const auto a = model_.graph().node_index(v);
    const auto b = model_.graph().node_index(u);
    const std::size_t total = model_.units().units_in(v.context).size();
    if (!a || !b || total == 0 || v.context != u.context) return 0.0;
    const auto ea = entries(*a);
    const auto eb = entries(*b);
    double sum = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ea.size() && j < eb.size()) {
      if (ea[i].unit < eb[j].unit) {
        ++i;
      } else if (eb[j].unit < ea[i].unit) {
        ++j;
      } else {
        sum += std::clamp(1.0 - haversine_km(ea[i++].centroid, eb[j++].centroid) / d_max_, 0.0, 1.0);
      }
    }
    return std::clamp(sum / static_cast<double>(total), 0.0, 1.0);
  }

 private:
  struct Entry {
    UnitId unit;
    Coordinate centroid;
  };
  std::span<const Entry> entries(std::size_t node) const {
    return std::span<const Entry>(entries_).subspan(offset_[node], offset_[node + 1] - offset_[node]);
  }

  const Model& model_;
  double d_max_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> offset_;
};

class TwoLayerWeight final : public EdgeWeight {
 public:
  TwoLayerWeight(const Partonomy& p, const Footprints& f, std::size_t layer)
      : partonomy_(p), footprints_(f), layer_(layer) {
    if (layer < 1 || layer > p.max_layer())
      throw std::out_of_range("partonomy layer " + std::to_string(layer) + " has no layer below it");
  }

  Scheme scheme() const override { return Scheme::TwoLayer; }

  double operator()(NodeRef v, NodeRef u) const override {
    return sim_two_layer(partonomy_, footprints_, v.user, u.user, layer_);
  }

 private:
  const Partonomy& partonomy_;
  const Footprints& footprints_;
  std::size_t layer_;
};

/// Two-layer similarity for cold-start query nodes, cosine otherwise. The
/// branch depends on the query node only, so the weight is not symmetric.
class CfTlWeight final : public EdgeWeight {
 public:
  CfTlWeight(const Model& model, const CosineWeight& cosine, const TwoLayerWeight& two_layer)
      : model_(model), cosine_(cosine), two_layer_(two_layer) {}

  Scheme scheme() const override { return Scheme::CfTl; }
  bool symmetric() const override { return false; }

  double operator()(NodeRef v, NodeRef u) const override {
    return model_.is_cold_start(v) ? two_layer_(v, u) : cosine_(v, u);
  }

 private:
  const Model& model_;
  const CosineWeight& cosine_;
  const TwoLayerWeight& two_layer_;
};

struct WeightOptions {
  Scheme scheme{Scheme::Cosine};
  CosineScope cf_scope{CosineScope::All};
  ProfileMode profile{ProfileMode::Binary};
  std::size_t tl_layer{2};
  std::optional<double> ic_d_max_km{};
};

/// Owns a weight function together with the component weights it delegates to.
class WeightBundle {
 public:
  WeightBundle(const WeightOptions& options, const Model& model, const Partonomy* partonomy,
               const Footprints* footprints) {
    auto need_partonomy = [&] {
      if (!partonomy || !footprints)
        throw std::invalid_argument(std::string(scheme_name(options.scheme)) +
                                    " weighting needs a partonomy");
    };
    switch (options.scheme) {
      case Scheme::MostPopular: main_ = std::make_unique<UniformWeight>(); break;
      case Scheme::Cosine:
        main_ = std::make_unique<CosineWeight>(model, options.cf_scope, options.profile);
        break;
      case Scheme::Geo: main_ = std::make_unique<GeoWeight>(model); break;
      case Scheme::IntraCluster:
        main_ = std::make_unique<IntraClusterWeight>(model, options.ic_d_max_km);
        break;
      case Scheme::TwoLayer:
        need_partonomy();
        main_ = std::make_unique<TwoLayerWeight>(*partonomy, *footprints, options.tl_layer);
        break;
      case Scheme::CfTl:
        need_partonomy();
        cosine_ = std::make_unique<CosineWeight>(model, CosineScope::All, options.profile);
        two_layer_ = std::make_unique<TwoLayerWeight>(*partonomy, *footprints, options.tl_layer);
        main_ = std::make_unique<CfTlWeight>(model, *cosine_, *two_layer_);
        break;
    }
  }

  const EdgeWeight& weight() const { return *main_; }

 private:
  std::unique_ptr<CosineWeight> cosine_;
  std::unique_ptr<TwoLayerWeight> two_layer_;
  std::unique_ptr<EdgeWeight> main_;
};

}  // namespace georel
