#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "georel/model.hpp"
#include "georel/weighting.hpp"

namespace georel {

struct ScoredUnit {
  UnitId unit;
  double score;
};

/// Accumulated neighbor votes, ascending by unit. Only units selected by at
/// least one neighbor appear.
using UnitScores = std::vector<ScoredUnit>;

struct Recommendation {
  UnitId unit;
  double score;
  bool backfilled;
};

struct RecommendationList {
  NodeRef query;
  Scheme scheme;
  std::size_t n;
  std::vector<Recommendation> items;
};

/// score(i) = sum over neighbors v' of w(v, v') for every unit i in v''s
/// selections. `v` may be a virtual node for a user with no selections in
/// its context.
inline UnitScores score_all(const Model& model, const EdgeWeight& weight, NodeRef v) {
  const RelationalGraph& graph = model.graph();
  if (!graph.has_context(v.context)) throw std::invalid_argument("context has no activity");
  const auto [first, count] = model.units().unit_range(v.context);
  std::vector<double> acc(count, 0.0);
  std::vector<char> seen(count, 0);
  for (const auto& member : graph.members(v.context)) {
    if (member.user == v.user) continue;
    const double w = weight(v, NodeRef{member.user, v.context});
    for (const auto& s : model.selections(member.node)) {
      const std::size_t k = s.unit.index() - first;
      acc[k] += w;
      seen[k] = 1;
    }
  }
  UnitScores out;
  for (std::size_t k = 0; k < count; ++k)
    if (seen[k]) out.push_back({UnitId{first + k}, acc[k]});
  return out;
}

namespace detail {

// Higher score first, then more popular, then lower id.
struct RankOrder {
  const Model& model;
  bool operator()(const ScoredUnit& a, const ScoredUnit& b) const {
    if (a.score != b.score) return a.score > b.score;
    const auto pa = model.popularity(a.unit);
    const auto pb = model.popularity(b.unit);
    if (pa != pb) return pa > pb;
    return a.unit < b.unit;
  }
};

inline bool contains_unit(std::span<const UnitCount> selected, UnitId u) {
  return std::binary_search(selected.begin(), selected.end(), UnitCount{u, 0},
                            [](const UnitCount& a, const UnitCount& b) { return a.unit < b.unit; });
}

}  // namespace detail

/// Top-n units by score among units with positive score that the query user
/// has not already selected in the query context. With `backfill`, slots left
/// empty are filled with the most popular remaining units of the context,
/// scored 0 and flagged.
inline RecommendationList recommend(const Model& model, const EdgeWeight& weight, NodeRef v,
                                    std::size_t n, bool backfill) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  UnitScores scores = score_all(model, weight, v);
  const auto own = model.selections(v);
  std::erase_if(scores, [&](const ScoredUnit& s) {
    return !(s.score > 0.0) || detail::contains_unit(own, s.unit);
  });
  const detail::RankOrder order{model};
  const std::size_t take = std::min(n, scores.size());
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(take),
                    scores.end(), order);

  RecommendationList list{v, weight.scheme(), n, {}};
  for (std::size_t k = 0; k < take; ++k) list.items.push_back({scores[k].unit, scores[k].score, false});

  if (backfill && list.items.size() < n) {
    std::vector<ScoredUnit> rest;
    for (UnitId u : model.units().units_in(v.context)) {
      if (detail::contains_unit(own, u)) continue;
      if (std::any_of(list.items.begin(), list.items.end(),
                      [u](const Recommendation& r) { return r.unit == u; }))
        continue;
      rest.push_back({u, 0.0});
    }
    std::sort(rest.begin(), rest.end(), order);
    for (const auto& s : rest) {
      if (list.items.size() == n) break;
      list.items.push_back({s.unit, 0.0, true});
    }
  }
  return list;
}

}  // namespace georel
