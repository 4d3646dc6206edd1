#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "georel/model.hpp"
#include "georel/partonomy.hpp"
#include "georel/recommend.hpp"
#include "georel/weighting.hpp"

namespace georel {

/// Hide every in-context selection of each test user (cold start).
struct LeaveAllOut {};
/// Hide `hide` random in-context selections per test user.
struct LeaveSomeOut {
  std::size_t hide{4};
};
/// A `cold_fraction` of test users lose everything, the rest lose `hide`.
struct LeaveSomeAllOut {
  double cold_fraction{0.5};
  std::size_t hide{4};
};
/// Hide exactly one selection; reported as recall only.
struct LeaveOneOut {};

using Scenario = std::variant<LeaveAllOut, LeaveSomeOut, LeaveSomeAllOut, LeaveOneOut>;

inline std::string scenario_name(const Scenario& s) {
  struct {
    std::string operator()(const LeaveAllOut&) const { return "all"; }
    std::string operator()(const LeaveSomeOut&) const { return "some"; }
    std::string operator()(const LeaveSomeAllOut&) const { return "mix"; }
    std::string operator()(const LeaveOneOut&) const { return "one"; }
  } name;
  return std::visit(name, s);
}

inline void validate(const Scenario& s) {
  if (const auto* some = std::get_if<LeaveSomeOut>(&s); some && some->hide < 1)
    throw std::invalid_argument("hide count must be at least 1");
  if (const auto* mix = std::get_if<LeaveSomeAllOut>(&s)) {
    if (mix->hide < 1) throw std::invalid_argument("hide count must be at least 1");
    if (!(mix->cold_fraction >= 0.0 && mix->cold_fraction <= 1.0))
      throw std::invalid_argument("cold fraction must lie in [0, 1]");
  }
}

struct SplitOptions {
  // Test users need at least this many items in the evaluation context.
  std::size_t min_selections{5};
};

struct TestCase {
  UserId user;
  bool cold{false};
  std::vector<Triple> hidden;
};

struct Split {
  std::size_t index{0};
  std::uint64_t seed{0};
  Dataset training;
  std::vector<TestCase> tests;
};

namespace detail {

inline std::mt19937_64 split_rng(std::uint64_t seed, std::size_t split) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split)};
  return std::mt19937_64(seq);
}

inline std::size_t hide_count(const Scenario& s) {
  if (const auto* some = std::get_if<LeaveSomeOut>(&s)) return some->hide;
  if (const auto* mix = std::get_if<LeaveSomeAllOut>(&s)) return mix->hide;
  return 1;
}

}  // namespace detail

/// Builds train/test splits for `context`. Every eligible user is a test
/// user. Leave-all-out always yields a single split.
inline std::vector<Split> make_splits(const Dataset& d, ContextId context, const Scenario& scenario,
                                      std::size_t n_splits, std::uint64_t seed,
                                      const SplitOptions& options = {},
                                      std::vector<std::string>* diagnostics = nullptr) {
  validate(scenario);
  auto note = [&](std::string msg) {
    if (diagnostics) diagnostics->push_back(std::move(msg));
  };
  if (std::holds_alternative<LeaveAllOut>(scenario) && n_splits != 1) {
    note("leave-all-out admits a single split; using 1 instead of " + std::to_string(n_splits));
    n_splits = 1;
  }
  if (n_splits < 1) throw std::invalid_argument("at least one split is required");

  const std::size_t k = detail::hide_count(scenario);
  const bool hides_all = std::holds_alternative<LeaveAllOut>(scenario);
  std::vector<UserId> eligible;
  for (UserId u : d.users_in(context)) {
    const std::size_t have = d.items_of(u, context).size();
    if (have < options.min_selections) continue;
    if (!hides_all && have < k) {
      note("user '" + d.vocabulary().users.name(u) + "' has " + std::to_string(have) +
           " selections, fewer than the " + std::to_string(k) + " to hide; excluded");
      continue;
    }
    eligible.push_back(u);
  }

  std::vector<Split> splits;
  for (std::size_t s = 0; s < n_splits; ++s) {
    auto rng = detail::split_rng(seed, s);
    std::vector<bool> cold(eligible.size(), hides_all);
    if (const auto* mix = std::get_if<LeaveSomeAllOut>(&scenario)) {
      const auto n_cold = static_cast<std::size_t>(
          std::llround(mix->cold_fraction * static_cast<double>(eligible.size())));
      std::vector<std::size_t> order(eligible.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < std::min(n_cold, order.size()); ++i) cold[order[i]] = true;
    }

    Split split;
    split.index = s;
    split.seed = seed;
    std::vector<Triple> hidden_all;
    for (std::size_t e = 0; e < eligible.size(); ++e) {
      const auto mine = d.triples_of(eligible[e], context);
      TestCase tc{eligible[e], cold[e], {}};
      if (cold[e]) {
        tc.hidden.assign(mine.begin(), mine.end());
      } else {
        std::vector<std::size_t> idx(mine.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) tc.hidden.push_back(mine[i]);
      }
      hidden_all.insert(hidden_all.end(), tc.hidden.begin(), tc.hidden.end());
      split.tests.push_back(std::move(tc));
    }
    std::sort(hidden_all.begin(), hidden_all.end(), triple_less);
    split.training = d.filtered([&](const Triple& t) {
      return !std::binary_search(hidden_all.begin(), hidden_all.end(), t, triple_less);
    });
    splits.push_back(std::move(split));
  }
  return splits;
}

struct HitMetrics {
  double precision;
  double recall;
  std::size_t hits;
};

/// Hits are hidden selections whose unit is among the first n recommended
/// units; a unit may absorb several hidden selections, and selections with no
/// unit are misses. Absent when nothing is hidden.
inline std::optional<HitMetrics> precision_recall_at_n(std::span<const UnitId> recommended,
                                                       std::span<const std::optional<UnitId>> hidden,
                                                       std::size_t n) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  if (hidden.empty()) return std::nullopt;
  const auto top = recommended.first(std::min(n, recommended.size()));
  std::size_t hits = 0;
  for (const auto& h : hidden)
    if (h && std::find(top.begin(), top.end(), *h) != top.end()) ++hits;
  return HitMetrics{static_cast<double>(std::min(hits, n)) / static_cast<double>(n),
                    static_cast<double>(hits) / static_cast<double>(hidden.size()), hits};
}

struct ExperimentConfig {
  Scenario scenario{LeaveSomeOut{}};
  UnitOptions units;
  std::size_t n{10};
  std::size_t n_splits{5};
  std::uint64_t seed{42};
  SplitOptions split;
  bool backfill{true};
  // Whether hits landing on backfilled slots count.
  bool count_backfilled{true};
  InformationMode information{InformationMode::Inverse};
  std::size_t threads{1};
};

struct SplitMetrics {
  std::size_t split;
  double precision;
  double recall;
  std::size_t users;  // test users with a non-empty list
};

struct EvalReport {
  Scheme scheme;
  std::string scenario;
  std::size_t n;
  bool recall_only;
  std::vector<SplitMetrics> splits;
  double mean_precision{0.0};
  double std_precision{0.0};
  double mean_recall{0.0};
  double std_recall{0.0};
};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline std::vector<SplitMetrics> evaluate_split(const Split& split, ContextId context,
                                                const ExperimentConfig& cfg,
                                                std::span<const WeightOptions> schemes,
                                                const Partonomy* base) {
  // everything below is derived from the training dataset only
  const Model model(split.training, cfg.units);
  std::optional<Partonomy> partonomy;
  std::optional<Footprints> footprints;
  if (base) {
    partonomy = *base;
    partonomy->attach_units(model.units(), model.dataset().vocabulary());
    footprints = Footprints::build(*partonomy, model);
    build_information(*partonomy, *footprints, cfg.information);
  }
  const Dataset& vocab_source = model.dataset();

  std::vector<std::vector<std::optional<UnitId>>> hidden_units;
  for (const auto& tc : split.tests) {
    auto& hu = hidden_units.emplace_back();
    for (const Triple& t : tc.hidden)
      hu.push_back(model.units().match(context, t.item, vocab_source.location(t.item)));
  }

  std::vector<SplitMetrics> out;
  for (const auto& options : schemes) {
    SplitMetrics sm{split.index, 0.0, 0.0, 0};
    if (model.graph().has_context(context)) {
      const WeightBundle bundle(options, model, partonomy ? &*partonomy : nullptr,
                                footprints ? &*footprints : nullptr);
      std::vector<UnitId> units;
      for (std::size_t t = 0; t < split.tests.size(); ++t) {
        const auto list = recommend(model, bundle.weight(), NodeRef{split.tests[t].user, context},
                                    cfg.n, cfg.backfill);
        if (list.items.empty()) continue;
        units.clear();
        for (const auto& r : list.items)
          units.push_back(r.backfilled && !cfg.count_backfilled ? UnitId{} : r.unit);
        const auto m = precision_recall_at_n(units, hidden_units[t], cfg.n);
        if (!m) continue;
        sm.precision += m->precision;
        sm.recall += m->recall;
        ++sm.users;
      }
      if (sm.users > 0) {
        sm.precision /= static_cast<double>(sm.users);
        sm.recall /= static_cast<double>(sm.users);
      }
    }
    out.push_back(sm);
  }
  return out;
}

}  // namespace detail

/// Evaluates several weighting schemes on shared splits. Graph, units,
/// partonomy information and profiles are rebuilt from each split's training
/// data. `base` supplies the partonomy layers above the unit leaves.
inline std::vector<EvalReport> run_experiments(const Dataset& d, ContextId context,
                                               const ExperimentConfig& cfg,
                                               std::span<const WeightOptions> schemes,
                                               const Partonomy* base = nullptr,
                                               std::vector<std::string>* diagnostics = nullptr) {
  if (cfg.n < 1) throw std::invalid_argument("n must be at least 1");
  const auto splits = make_splits(d, context, cfg.scenario, cfg.n_splits, cfg.seed, cfg.split, diagnostics);

  std::vector<std::vector<SplitMetrics>> per_split(splits.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, splits.size()));
  if (workers == 1) {
    for (std::size_t s = 0; s < splits.size(); ++s)
      per_split[s] = detail::evaluate_split(splits[s], context, cfg, schemes, base);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t s = w; s < splits.size(); s += workers)
              per_split[s] = detail::evaluate_split(splits[s], context, cfg, schemes, base);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<EvalReport> reports;
  for (std::size_t k = 0; k < schemes.size(); ++k) {
    EvalReport r{schemes[k].scheme, scenario_name(cfg.scenario), cfg.n,
                 std::holds_alternative<LeaveOneOut>(cfg.scenario), {}};
    std::vector<double> ps;
    std::vector<double> rs;
    for (const auto& sm : per_split) {
      r.splits.push_back(sm[k]);
      ps.push_back(sm[k].precision);
      rs.push_back(sm[k].recall);
    }
    detail::mean_std(ps, r.mean_precision, r.std_precision);
    detail::mean_std(rs, r.mean_recall, r.std_recall);
    reports.push_back(std::move(r));
  }
  return reports;
}

inline EvalReport run_experiment(const Dataset& d, ContextId context, const ExperimentConfig& cfg,
                                 const WeightOptions& scheme, const Partonomy* base = nullptr,
                                 std::vector<std::string>* diagnostics = nullptr) {
  return run_experiments(d, context, cfg, std::span<const WeightOptions>(&scheme, 1), base,
                         diagnostics)
      .front();
}

/// Columns `scheme,scenario,split,precision_at_n,recall_at_n`, one row per
/// split followed by `mean` and `std` rows. Precision is left empty for
/// recall-only scenarios.
inline void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << "scheme,scenario,split,precision_at_n,recall_at_n\n";
  auto row = [&os](const EvalReport& r, const std::string& split, double p, double rec) {
    os << scheme_name(r.scheme) << ',' << r.scenario << ',' << split << ',';
    if (!r.recall_only) os << std::fixed << std::setprecision(6) << p;
    os << ',' << std::fixed << std::setprecision(6) << rec << '\n';
  };
  for (const auto& r : reports) {
    for (const auto& s : r.splits) row(r, std::to_string(s.split), s.precision, s.recall);
    row(r, "mean", r.mean_precision, r.mean_recall);
    row(r, "std", r.std_precision, r.std_recall);
  }
}

}  // namespace georel
