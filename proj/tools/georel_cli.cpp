// georel: clustering, recommendation, offline evaluation and synthetic data
// over geotagged implicit feedback.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "georel/georel.hpp"

namespace {

using namespace georel;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

// Raised for problems with input data or files (exit status 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static auto log = [] {
    auto l = spdlog::stderr_logger_st("georel");
    l->set_pattern("%l: %v");
    return l;
  }();
  return log;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

nlohmann::json read_json(const std::string& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

// Writes `text` to `path`, or to stdout when the path is empty or "-".
void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

struct DataOptions {
  std::string events;
  std::string contexts;
  std::string partonomy;
  std::string context;
  std::string units{"cluster"};
  double radius_km{1.0};
  std::size_t min_points{3};

  void add_to(CLI::App& app, bool with_partonomy) {
    app.add_option("--events", events, "Event CSV")->required();
    app.add_option("--contexts", contexts, "Context JSON (derived from declared ids when omitted)");
    if (with_partonomy) app.add_option("--partonomy", partonomy, "Partonomy JSON forest");
    app.add_option("--context", context, "Context of interest")->required();
    app.add_option("--units", units, "Recommendation units")
        ->check(CLI::IsMember({"cluster", "item"}))
        ->capture_default_str();
    app.add_option("--radius-km", radius_km, "DBSCAN radius")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--min-points", min_points, "DBSCAN minimum points")
        ->check(CLI::Range(1, 1 << 30))
        ->capture_default_str();
  }

  UnitOptions unit_options() const {
    return {units == "item" ? UnitMode::Item : UnitMode::Cluster, radius_km, min_points};
  }
};

struct Loaded {
  Dataset dataset;
  ContextId context;
  std::optional<Partonomy> partonomy;
};

Loaded load(const DataOptions& o) {
  auto in = open_input(o.events);
  io::EventsCsv csv;
  try {
    csv = io::read_events_csv(in);
  } catch (const std::runtime_error& e) {
    throw DataError("'" + o.events + "': " + e.what());
  }
  for (const auto& d : csv.diagnostics) logger()->debug("{}: {}", o.events, d);

  std::vector<GeoContext> contexts;
  try {
    contexts = o.contexts.empty() ? io::infer_contexts(csv.events)
                                  : io::read_contexts_json(read_json(o.contexts));
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("'" + o.contexts + "': " + e.what());
  }
  IngestResult ingested;
  try {
    ingested = ingest(csv.events, std::span<const GeoContext>(contexts));
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  for (const auto& d : ingested.diagnostics) logger()->debug("ingest: {}", d);
  const std::size_t rejected = csv.diagnostics.size() + ingested.diagnostics.size();
  if (rejected > 0) logger()->warn("{} event records rejected (--log debug lists them)", rejected);
  logger()->info("{} triples, {} users, {} items, {} contexts", ingested.dataset.triples().size(),
                 ingested.dataset.num_users(), ingested.dataset.num_items(),
                 ingested.dataset.num_contexts());

  Loaded out{std::move(ingested.dataset), {}, std::nullopt};
  const auto g = out.dataset.vocabulary().contexts.find(o.context);
  if (!g) throw DataError("unknown context '" + o.context + "'");
  out.context = *g;
  if (!o.partonomy.empty()) {
    try {
      out.partonomy = Partonomy::from_json(read_json(o.partonomy));
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError("'" + o.partonomy + "': " + e.what());
    }
  }
  return out;
}

struct SchemeFlags {
  std::string scheme{"cf"};
  std::string cf_scope{"all"};
  std::string profile{"binary"};
  std::size_t tl_layer{2};
  double ic_d_max_km{0.0};

  void add_to(CLI::App& app, bool allow_list) {
    auto* opt = app.add_option("--scheme", scheme,
                               allow_list ? "Weighting scheme(s), comma separated" : "Weighting scheme")
                    ->capture_default_str();
    if (!allow_list) opt->check(CLI::IsMember({"mp", "cf", "geo", "ic", "tl", "cf-tl"}));
    app.add_option("--cf-scope", cf_scope, "Cosine profile scope")
        ->check(CLI::IsMember({"context", "all"}))
        ->capture_default_str();
    app.add_option("--profile", profile, "Profile components")
        ->check(CLI::IsMember({"binary", "count"}))
        ->capture_default_str();
    app.add_option("--tl-layer", tl_layer, "Partonomy layer for two-layer similarity")
        ->check(CLI::Range(1, 64))
        ->capture_default_str();
    app.add_option("--ic-dmax-km", ic_d_max_km,
                   "Per-cluster d_max for intra-cluster weighting (default 2 x radius)")
        ->check(CLI::NonNegativeNumber);
  }

  std::vector<WeightOptions> options() const {
    std::vector<WeightOptions> out;
    std::stringstream ss(scheme);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto s = parse_scheme(name);
      if (!s) throw CLI::ValidationError("--scheme", "unknown scheme '" + name + "'");
      WeightOptions w;
      w.scheme = *s;
      w.cf_scope = cf_scope == "context" ? CosineScope::Context : CosineScope::All;
      w.profile = profile == "count" ? ProfileMode::Count : ProfileMode::Binary;
      w.tl_layer = tl_layer;
      if (ic_d_max_km > 0.0) w.ic_d_max_km = ic_d_max_km;
      out.push_back(w);
    }
    if (out.empty()) throw CLI::ValidationError("--scheme", "no scheme given");
    return out;
  }

  bool needs_partonomy() const {
    for (const auto& w : options())
      if (w.scheme == Scheme::TwoLayer || w.scheme == Scheme::CfTl) return true;
    return false;
  }
};

int run_cluster(const DataOptions& data, const std::string& out_path) {
  Loaded l = load(data);
  const Dataset& d = l.dataset;
  std::vector<ClusterPoint> points;
  for (ItemId i : d.items_in(l.context)) points.push_back({i, d.location(i)});
  const Clustering c = dbscan(points, data.radius_km, data.min_points);
  logger()->info("{} points, {} clusters", points.size(), c.size());
  write_output(out_path, io::clustering_to_json(c, d.vocabulary(), data.context).dump(2) + "\n");
  return 0;
}

struct PreparedModel {
  std::unique_ptr<Model> model;
  std::optional<Partonomy> partonomy;
  std::optional<Footprints> footprints;
};

int run_recommend(const DataOptions& data, const SchemeFlags& flags, const std::string& user,
                  std::size_t n, bool backfill, const std::string& out_path) {
  const auto weights = flags.options();
  if (weights.size() != 1) throw CLI::ValidationError("--scheme", "recommend takes one scheme");
  if (flags.needs_partonomy() && data.partonomy.empty())
    throw CLI::ValidationError("--partonomy", "required by the tl and cf-tl schemes");

  Loaded l = load(data);
  const auto u = l.dataset.vocabulary().users.find(user);
  if (!u) throw DataError("unknown user '" + user + "'");
  PreparedModel pm;
  pm.model = std::make_unique<Model>(std::move(l.dataset), data.unit_options());
  if (l.partonomy) {
    pm.partonomy = std::move(l.partonomy);
    pm.partonomy->attach_units(pm.model->units(), pm.model->dataset().vocabulary());
    pm.footprints = Footprints::build(*pm.partonomy, *pm.model);
    build_information(*pm.partonomy, *pm.footprints);
  }
  const WeightBundle bundle(weights.front(), *pm.model, pm.partonomy ? &*pm.partonomy : nullptr,
                            pm.footprints ? &*pm.footprints : nullptr);
  RecommendationList list;
  try {
    list = recommend(*pm.model, bundle.weight(), NodeRef{*u, l.context}, n, backfill);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  write_output(out_path, io::recommendation_to_json(list, *pm.model).dump(2) + "\n");
  return 0;
}

struct EvaluateFlags {
  std::string scenario{"some"};
  double cold_fraction{0.5};
  std::size_t hide{4};
  std::size_t n{10};
  std::size_t splits{5};
  std::uint64_t seed{42};
  std::optional<std::size_t> min_selections;
  bool no_backfill{false};
  bool ignore_backfilled_hits{false};
  std::string information{"inverse"};
  std::string out;
};

int run_evaluate(const DataOptions& data, const SchemeFlags& flags, const EvaluateFlags& ev,
                 std::size_t threads) {
  const auto weights = flags.options();
  if (flags.needs_partonomy() && data.partonomy.empty())
    throw CLI::ValidationError("--partonomy", "required by the tl and cf-tl schemes");

  ExperimentConfig cfg;
  if (ev.scenario == "all") {
    cfg.scenario = LeaveAllOut{};
  } else if (ev.scenario == "some") {
    cfg.scenario = LeaveSomeOut{ev.hide};
  } else if (ev.scenario == "mix") {
    cfg.scenario = LeaveSomeAllOut{ev.cold_fraction, ev.hide};
  } else {
    cfg.scenario = LeaveOneOut{};
  }
  cfg.units = data.unit_options();
  cfg.n = ev.n;
  cfg.n_splits = ev.splits;
  cfg.seed = ev.seed;
  cfg.split.min_selections = ev.min_selections.value_or(ev.scenario == "one" ? 1 : 5);
  cfg.backfill = !ev.no_backfill;
  cfg.count_backfilled = !ev.ignore_backfilled_hits;
  cfg.information = ev.information == "log" ? InformationMode::LogInverse : InformationMode::Inverse;
  cfg.threads = threads;
  if (ev.scenario == "all" && ev.splits != 1)
    logger()->warn("leave-all-out has a single possible split; --splits {} forced to 1", ev.splits);

  Loaded l = load(data);
  std::vector<std::string> diagnostics;
  const auto reports = run_experiments(l.dataset, l.context, cfg, weights,
                                       l.partonomy ? &*l.partonomy : nullptr, &diagnostics);
  for (const auto& d : diagnostics) logger()->debug("split: {}", d);
  for (const auto& r : reports) {
    if (r.recall_only)
      logger()->info("{}: recall@{} {:.4f} (sd {:.4f})", scheme_name(r.scheme), r.n, r.mean_recall,
                     r.std_recall);
    else
      logger()->info("{}: precision@{} {:.4f} (sd {:.4f}), recall@{} {:.4f} (sd {:.4f})",
                     scheme_name(r.scheme), r.n, r.mean_precision, r.std_precision, r.n,
                     r.mean_recall, r.std_recall);
  }
  std::ostringstream csv;
  write_report_csv(csv, reports);
  write_output(ev.out, csv.str());
  return 0;
}

int run_synth(const SynthConfig& cfg, std::uint64_t seed, const std::string& out_dir) {
  SynthData data;
  try {
    data = synth_dataset(cfg, seed);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("synth", e.what());
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir + "': " + ec.message());
  const std::filesystem::path dir(out_dir);
  std::ostringstream events;
  io::write_events_csv(events, data.events);
  write_output((dir / "events.csv").string(), events.str());
  write_output((dir / "contexts.json").string(), io::contexts_to_json(data.contexts).dump(2) + "\n");
  write_output((dir / "partonomy.json").string(), data.partonomy.to_json().dump(2) + "\n");
  logger()->info("{} events for {} users; evaluation context '{}'", data.events.size(), cfg.users,
                 data.eval_context);
  std::cout << data.eval_context << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-aware recommendation over relational neighbor graphs"};
  app.require_subcommand(1);
  std::string log_level = "info";
  std::size_t threads = 1;
  app.add_option("--log", log_level, "Diagnostics on stderr")
      ->check(CLI::IsMember({"quiet", "info", "debug"}))
      ->capture_default_str();
  app.add_option("--threads", threads, "Maximum worker threads")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();

  DataOptions cluster_data;
  std::string cluster_out;
  auto* cluster = app.add_subcommand("cluster", "DBSCAN the items of one context");
  cluster_data.add_to(*cluster, false);
  cluster->add_option("--out", cluster_out, "Output JSON (stdout when omitted)");

  DataOptions rec_data;
  SchemeFlags rec_flags;
  std::string rec_user;
  std::size_t rec_n = 10;
  bool rec_backfill = false;
  std::string rec_out;
  auto* rec = app.add_subcommand("recommend", "Top-N units for one user in one context");
  rec_data.add_to(*rec, true);
  rec_flags.add_to(*rec, false);
  rec->add_option("--user", rec_user, "Query user")->required();
  rec->add_option("--n", rec_n, "List length")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  rec->add_flag("--backfill", rec_backfill, "Pad short lists with popular units");
  rec->add_option("--out", rec_out, "Output JSON (stdout when omitted)");

  DataOptions ev_data;
  SchemeFlags ev_flags;
  EvaluateFlags ev;
  auto* evaluate = app.add_subcommand("evaluate", "Offline precision/recall evaluation");
  ev_data.add_to(*evaluate, true);
  ev_flags.add_to(*evaluate, true);
  evaluate->add_option("--scenario", ev.scenario, "all | some | mix | one")
      ->check(CLI::IsMember({"all", "some", "mix", "one"}))
      ->capture_default_str();
  evaluate->add_option("--cold-fraction", ev.cold_fraction, "Cold-start share for mix")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  evaluate->add_option("--hide", ev.hide, "Selections hidden per warm test user")
      ->check(CLI::Range(1, 1 << 20))
      ->capture_default_str();
  evaluate->add_option("--n", ev.n, "List length")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  evaluate->add_option("--splits", ev.splits, "Random splits")
      ->check(CLI::Range(1, 1 << 16))
      ->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Split seed")->capture_default_str();
  evaluate->add_option("--min-selections", ev.min_selections,
                       "Minimum in-context items of a test user (default 5, 1 for --scenario one)");
  evaluate->add_flag("--no-backfill", ev.no_backfill, "Do not pad short lists");
  evaluate->add_flag("--ignore-backfilled-hits", ev.ignore_backfilled_hits,
                     "Hits on backfilled slots do not count");
  evaluate->add_option("--information", ev.information, "Partonomy information weight")
      ->check(CLI::IsMember({"inverse", "log"}))
      ->capture_default_str();
  evaluate->add_option("--out", ev.out, "Report CSV (stdout when omitted)");

  SynthConfig synth_cfg;
  std::uint64_t synth_seed = 7;
  std::string synth_dir = ".";
  auto* synth = app.add_subcommand("synth", "Write a synthetic events/contexts/partonomy set");
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--out-dir", synth_dir, "Output directory")->capture_default_str();
  synth->add_option("--users", synth_cfg.users)->capture_default_str();
  synth->add_option("--archetypes", synth_cfg.archetypes)->capture_default_str();
  synth->add_option("--pois-per-city", synth_cfg.pois_per_city)->capture_default_str();
  synth->add_option("--concentration", synth_cfg.concentration)->capture_default_str();
  synth->add_option("--foreign-concentration", synth_cfg.foreign_concentration)->capture_default_str();
  synth->add_option("--consistency", synth_cfg.consistency)->capture_default_str();
  synth->add_option("--cold-fraction", synth_cfg.cold_fraction)->capture_default_str();
  synth->add_option("--noise-fraction", synth_cfg.noise_fraction)->capture_default_str();
  synth->add_option("--mean-eval-photos", synth_cfg.mean_eval_photos)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kUsageError;
  }

  logger()->set_level(log_level == "quiet"  ? spdlog::level::err
                      : log_level == "debug" ? spdlog::level::debug
                                             : spdlog::level::info);
  try {
    if (*cluster) return run_cluster(cluster_data, cluster_out);
    if (*rec) return run_recommend(rec_data, rec_flags, rec_user, rec_n, rec_backfill, rec_out);
    if (*evaluate) return run_evaluate(ev_data, ev_flags, ev, threads);
    if (*synth) return run_synth(synth_cfg, synth_seed, synth_dir);
  } catch (const CLI::ValidationError& e) {
    logger()->error("{}", e.what());
    return kUsageError;
  } catch (const DataError& e) {
    logger()->error("{}", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return kDataError;
  }
  return kUsageError;
}
