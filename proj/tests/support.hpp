#pragma once

// Fixtures, random generators and brute-force reference implementations
// shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "georel/georel.hpp"

namespace georel::fixtures {

inline constexpr double kKmPerDegree = kEarthRadiusKm * std::numbers::pi / 180.0;

// Point `east_km` east and `north_km` north of `origin` (small offsets).
inline Coordinate offset_km(const Coordinate& origin, double east_km, double north_km) {
  return {origin.lat + north_km / kKmPerDegree,
          origin.lon + east_km / (kKmPerDegree * std::cos(deg_to_rad(origin.lat)))};
}

// Hand-assembled datasets: contexts first, then selections by name.
class DatasetBuilder {
 public:
  DatasetBuilder& context(const std::string& id, Coordinate sw, Coordinate ne) {
    vocab_->add_context({id, id, {sw, ne}});
    return *this;
  }

  DatasetBuilder& select(const std::string& user, const std::string& context,
                         const std::string& item, Coordinate where, std::uint32_t count = 1) {
    const UserId u = vocab_->users.intern(user);
    const ItemId i = vocab_->add_item(item, where);
    triples_.push_back({u, *vocab_->contexts.find(context), i, count});
    return *this;
  }

  Dataset build() const { return Dataset(vocab_, triples_); }

 private:
  std::shared_ptr<Vocabulary> vocab_ = std::make_shared<Vocabulary>();
  std::vector<Triple> triples_;
};

struct WorldParams {
  std::size_t contexts{2};
  std::size_t users{12};
  std::size_t pois{6};           // per context
  std::size_t max_selections{6};  // per user and context
  double spread_km{0.2};
  bool shared_items{false};  // users pick POI items rather than distinct photos
};

struct World {
  Dataset dataset;
  Partonomy partonomy;  // root (3) > two states (2) > one city per context (1)
};

// Random small world: contexts 50 km apart, POIs 5 km apart inside each,
// selections scattered around POIs.
template <class Rng>
World random_world(Rng& rng, const WorldParams& p) {
  std::uniform_int_distribution<std::size_t> pick_poi(0, p.pois - 1);
  std::uniform_int_distribution<std::size_t> n_sel(0, p.max_selections);
  std::normal_distribution<double> jitter(0.0, p.spread_km);
  std::bernoulli_distribution visits(0.7);

  std::vector<GeoContext> contexts;
  std::vector<std::vector<Coordinate>> pois(p.contexts);
  World w;
  const NodeId root = w.partonomy.add_node("root", "root", 3);
  const NodeId states[2] = {w.partonomy.add_node("s0", "s0", 2, root),
                            w.partonomy.add_node("s1", "s1", 2, root)};
  for (std::size_t g = 0; g < p.contexts; ++g) {
    const Coordinate c{10.0, 20.0 + 0.5 * static_cast<double>(g)};
    const std::string id = "g" + std::to_string(g);
    contexts.push_back({id, id, {offset_km(c, -20, -20), offset_km(c, 20, 20)}});
    for (std::size_t k = 0; k < p.pois; ++k)
      pois[g].push_back(offset_km(c, -12.5 + 5.0 * static_cast<double>(k % 6),
                                  -12.5 + 5.0 * static_cast<double>(k / 6)));
    w.partonomy.add_node(id, id, 1, states[g % 2]);
  }

  std::vector<EventRecord> events;
  std::size_t photo = 0;
  for (std::size_t u = 0; u < p.users; ++u) {
    for (std::size_t g = 0; g < p.contexts; ++g) {
      if (!visits(rng)) continue;
      const std::size_t k = n_sel(rng);
      for (std::size_t s = 0; s < k; ++s) {
        const std::size_t poi = pick_poi(rng);
        const std::string item = p.shared_items ? "g" + std::to_string(g) + "poi" + std::to_string(poi)
                                                : "p" + std::to_string(photo++);
        const Coordinate where = p.shared_items ? pois[g][poi]
                                                : offset_km(pois[g][poi], jitter(rng), jitter(rng));
        events.push_back({"u" + std::to_string(u), item, where, contexts[g].id, std::nullopt});
      }
    }
  }
  w.dataset = ingest(events, std::span<const GeoContext>(contexts)).dataset;
  return w;
}

// A model with partonomy, footprints and information built from its dataset.
struct Prepared {
  Model model;
  Partonomy partonomy;
  Footprints footprints;

  Prepared(Dataset d, const UnitOptions& units, Partonomy base,
           InformationMode mode = InformationMode::Inverse)
      : model(std::move(d), units), partonomy(std::move(base)) {
    partonomy.attach_units(model.units(), model.dataset().vocabulary());
    footprints = Footprints::build(partonomy, model);
    build_information(partonomy, footprints, mode);
  }
};

// Symmetric random weights keyed by user pair.
class TableWeight final : public EdgeWeight {
 public:
  template <class Rng>
  TableWeight(Rng& rng, std::size_t users) : n_(users), w_(users * users) {
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::bernoulli_distribution zero(0.15);
    for (std::size_t a = 0; a < users; ++a)
      for (std::size_t b = a; b < users; ++b) {
        // coarse values make score ties common
        const double x = zero(rng) ? 0.0 : std::round(value(rng) * 8.0) / 8.0;
        w_[a * n_ + b] = w_[b * n_ + a] = x;
      }
  }
  Scheme scheme() const override { return Scheme::MostPopular; }
  double operator()(NodeRef v, NodeRef u) const override {
    return w_[v.user.index() * n_ + u.user.index()];
  }

 private:
  std::size_t n_;
  std::vector<double> w_;
};

class ScaledWeight final : public EdgeWeight {
 public:
  ScaledWeight(const EdgeWeight& inner, double factor) : inner_(inner), factor_(factor) {}
  Scheme scheme() const override { return inner_.scheme(); }
  bool symmetric() const override { return inner_.symmetric(); }
  double operator()(NodeRef v, NodeRef u) const override { return factor_ * inner_(v, u); }

 private:
  const EdgeWeight& inner_;
  double factor_;
};

// The scoring loop written out directly over the dataset: every other user with a
// selection in the context is a neighbor and votes w(v, v') once for every
// unit among its selections. Ties go to the more popular unit, then the lower
// id; units the query user selected and zero scores are dropped.
inline std::vector<std::pair<UnitId, double>> naive_recommend(const Model& m, const EdgeWeight& w,
                                                              NodeRef v, std::size_t n) {
  const Dataset& d = m.dataset();
  std::map<UnitId, double> score;
  std::map<UnitId, std::set<UserId>> selectors;
  std::set<UnitId> own;
  for (const Triple& t : d.triples()) {
    if (t.context != v.context) continue;
    const auto unit = m.units().unit_of(t.context, t.item);
    if (!unit) continue;
    selectors[*unit].insert(t.user);
    if (t.user == v.user) own.insert(*unit);
  }
  for (UserId other : d.users_in(v.context)) {
    if (other == v.user) continue;
    const double weight = w(v, NodeRef{other, v.context});
    std::set<UnitId> units;
    for (ItemId i : d.items_of(other, v.context))
      if (auto unit = m.units().unit_of(v.context, i)) units.insert(*unit);
    for (UnitId unit : units) score[unit] += weight;
  }
  std::vector<std::pair<UnitId, double>> ranked;
  for (const auto& [unit, s] : score)
    if (s > 0.0 && !own.contains(unit)) ranked.emplace_back(unit, s);
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    const auto pa = selectors[a.first].size();
    const auto pb = selectors[b.first].size();
    if (pa != pb) return pa > pb;
    return a.first < b.first;
  });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

// Reference DBSCAN facts computed from explicit pairwise neighborhoods.
struct DbscanReference {
  std::vector<std::vector<std::size_t>> neighborhood;  // includes the point
  std::vector<bool> core;
  std::vector<std::size_t> component;  // core points: component id; others unused
  std::size_t components{0};
};

inline DbscanReference reference_dbscan(std::span<const ClusterPoint> pts, double eps,
                                        std::size_t min_points) {
  DbscanReference r;
  const std::size_t n = pts.size();
  r.neighborhood.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (haversine_km(pts[i].location, pts[j].location) <= eps) r.neighborhood[i].push_back(j);
  r.core.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.core[i] = r.neighborhood[i].size() >= min_points;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  r.component.assign(n, kNone);
  for (std::size_t s = 0; s < n; ++s) {
    if (!r.core[s] || r.component[s] != kNone) continue;
    std::vector<std::size_t> stack{s};
    r.component[s] = r.components;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q : r.neighborhood[p])
        if (r.core[q] && r.component[q] == kNone) {
          r.component[q] = r.components;
          stack.push_back(q);
        }
    }
    ++r.components;
  }
  return r;
}

// Empty when `c` is a valid DBSCAN partition of `pts` per the reference:
// core points and their connected components agree exactly, and every border
// assignment is density-valid. A component may only be missing when border
// claims by earlier clusters left it below min_points.
inline std::optional<std::string> check_dbscan(std::span<const ClusterPoint> pts, const Clustering& c,
                                               double eps, std::size_t min_points) {
  const auto ref = reference_dbscan(pts, eps, min_points);
  const std::size_t n = pts.size();
  auto label = [&](std::size_t i) { return c.item_to_unit(pts[i].item); };
  auto where = [&](std::size_t i) { return "point " + std::to_string(i); };

  for (std::size_t i = 0; i < n; ++i)
    if (c.is_core(pts[i].item) != ref.core[i]) return where(i) + ": core status differs";
  for (const auto& cl : c.clusters())
    if (cl.members.size() < min_points) return std::string("cluster below min_points");

  // component -> cluster label, and the reverse
  std::map<std::size_t, std::optional<ClusterId>> comp_label;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ref.core[i]) continue;
    auto [it, fresh] = comp_label.emplace(ref.component[i], label(i));
    if (!fresh && it->second != label(i)) return where(i) + ": core component split";
  }
  std::map<ClusterId, std::size_t> label_comp;
  for (const auto& [comp, lab] : comp_label) {
    if (!lab) continue;
    if (!label_comp.emplace(*lab, comp).second) return std::string("two components share a cluster");
  }
  if (label_comp.size() != c.size()) return std::string("cluster without a core component");

  std::set<std::size_t> dissolved;
  for (const auto& [comp, lab] : comp_label)
    if (!lab) dissolved.insert(comp);

  for (std::size_t i = 0; i < n; ++i) {
    if (ref.core[i]) continue;
    const auto lab = label(i);
    bool reaches_dissolved = false;
    bool reaches_own = false;
    bool reaches_any_live = false;
    for (std::size_t q : ref.neighborhood[i]) {
      if (!ref.core[q]) continue;
      if (dissolved.contains(ref.component[q])) reaches_dissolved = true;
      else reaches_any_live = true;
      if (lab && label_comp.at(*lab) == ref.component[q]) reaches_own = true;
    }
    if (lab && !reaches_own) return where(i) + ": border point not reachable from its cluster";
    if (!lab && reaches_any_live && !reaches_dissolved)
      return where(i) + ": reachable point left as noise";
  }

  // a dissolved component must have been starved below min_points
  for (std::size_t comp : dissolved) {
    std::set<std::size_t> kept;
    bool lost_border = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!ref.core[i] || ref.component[i] != comp) continue;
      kept.insert(i);
      for (std::size_t q : ref.neighborhood[i]) {
        if (ref.core[q]) continue;
        if (label(q)) lost_border = true;
        else kept.insert(q);
      }
    }
    if (!lost_border || kept.size() >= min_points)
      return std::string("component dissolved without cause");
  }
  return std::nullopt;
}

inline std::vector<ClusterPoint> points_of(const Dataset& d, ContextId g) {
  std::vector<ClusterPoint> out;
  for (ItemId i : d.items_in(g)) out.push_back({i, d.location(i)});
  return out;
}

template <class Rng>
std::vector<ClusterPoint> random_points(Rng& rng, std::size_t n, double spread_km) {
  std::uniform_int_distribution<int> blobs(1, 4);
  std::uniform_real_distribution<double> u(-spread_km, spread_km);
  std::normal_distribution<double> g(0.0, spread_km / 6.0);
  const Coordinate origin{-23.0, -43.0};
  std::vector<Coordinate> centers;
  for (int b = blobs(rng); b > 0; --b) centers.push_back(offset_km(origin, u(rng), u(rng)));
  std::vector<ClusterPoint> out;
  std::uniform_int_distribution<std::size_t> which(0, centers.size() - 1);
  std::bernoulli_distribution scatter(0.2);
  for (std::size_t i = 0; i < n; ++i) {
    const Coordinate c = scatter(rng) ? offset_km(origin, u(rng), u(rng))
                                      : offset_km(centers[which(rng)], g(rng), g(rng));
    out.push_back({ItemId{i}, c});
  }
  return out;
}

}  // namespace georel::fixtures
