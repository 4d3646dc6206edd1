#pragma once

#include <algorithm>
#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "georel/clustering.hpp"
#include "georel/dataset.hpp"
#include "georel/model.hpp"
#include "georel/recommend.hpp"

namespace georel::io {

namespace detail {

// Splits one CSV line; double quotes delimit fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

struct EventsCsv {
  std::vector<EventRecord> events;
  std::vector<std::string> diagnostics;
};

/// Reads `user_id,item_id,lat,lon,context_id,timestamp` (columns matched by
/// header name; context_id and timestamp may be empty). Malformed rows are
/// skipped with a diagnostic.
inline EventsCsv read_events_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("events file is empty");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  auto column = [&](std::string_view name, bool required) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    if (required) throw std::runtime_error("events header lacks column '" + std::string(name) + "'");
    return std::nullopt;
  };
  const auto c_user = *column("user_id", true);
  const auto c_item = *column("item_id", true);
  const auto c_lat = *column("lat", true);
  const auto c_lon = *column("lon", true);
  const auto c_ctx = column("context_id", false);
  const auto c_ts = column("timestamp", false);

  EventsCsv out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    auto bad = [&](const std::string& why) {
      out.diagnostics.push_back("line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() < header.size()) {
      bad("expected " + std::to_string(header.size()) + " fields");
      continue;
    }
    const auto lat = detail::parse_number<double>(f[c_lat]);
    const auto lon = detail::parse_number<double>(f[c_lon]);
    if (!lat || !lon) {
      bad("unparsable coordinate");
      continue;
    }
    EventRecord e{f[c_user], f[c_item], {*lat, *lon}, std::nullopt, std::nullopt};
    if (c_ctx && !f[*c_ctx].empty()) e.context = f[*c_ctx];
    if (c_ts && !f[*c_ts].empty()) {
      e.timestamp = detail::parse_number<std::int64_t>(f[*c_ts]);
      if (!e.timestamp) {
        bad("unparsable timestamp");
        continue;
      }
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

inline void write_events_csv(std::ostream& os, std::span<const EventRecord> events) {
  os << "user_id,item_id,lat,lon,context_id,timestamp\n";
  for (const auto& e : events) {
    os << detail::csv_field(e.user) << ',' << detail::csv_field(e.item) << ','
       << detail::format_double(e.location.lat) << ',' << detail::format_double(e.location.lon) << ','
       << (e.context ? detail::csv_field(*e.context) : std::string()) << ','
       << (e.timestamp ? std::to_string(*e.timestamp) : std::string()) << '\n';
  }
}

/// JSON array of `{id, name, sw: [lat, lon], ne: [lat, lon]}`.
inline std::vector<GeoContext> read_contexts_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::runtime_error("contexts file must hold a JSON array");
  std::vector<GeoContext> out;
  for (const auto& obj : j) {
    GeoContext g;
    g.id = obj.at("id").get<std::string>();
    g.name = obj.value("name", g.id);
    const auto& sw = obj.at("sw");
    const auto& ne = obj.at("ne");
    g.region = {{sw.at(0).get<double>(), sw.at(1).get<double>()},
                {ne.at(0).get<double>(), ne.at(1).get<double>()}};
    if (!g.region.is_valid())
      throw std::runtime_error("context '" + g.id +
                               "' has an invalid or antimeridian-crossing region");
    out.push_back(std::move(g));
  }
  return out;
}

inline nlohmann::json contexts_to_json(std::span<const GeoContext> contexts) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& g : contexts)
    j.push_back({{"id", g.id},
                 {"name", g.name},
                 {"sw", {g.region.sw.lat, g.region.sw.lon}},
                 {"ne", {g.region.ne.lat, g.region.ne.lon}}});
  return j;
}

/// Contexts for events that declare one but come without a contexts file:
/// each declared id gets the bounding box of its events, padded by `pad_deg`.
inline std::vector<GeoContext> infer_contexts(std::span<const EventRecord> events,
                                              double pad_deg = 0.01) {
  std::vector<GeoContext> out;
  for (const auto& e : events) {
    if (!e.context || e.context->empty() || !is_valid(e.location)) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const GeoContext& g) { return g.id == *e.context; });
    if (it == out.end()) {
      out.push_back({*e.context, *e.context, {e.location, e.location}});
      continue;
    }
    auto& r = it->region;
    r.sw = {std::min(r.sw.lat, e.location.lat), std::min(r.sw.lon, e.location.lon)};
    r.ne = {std::max(r.ne.lat, e.location.lat), std::max(r.ne.lon, e.location.lon)};
  }
  for (auto& g : out) {
    auto& r = g.region;
    r.sw = {std::max(-90.0, r.sw.lat - pad_deg), std::max(-180.0, r.sw.lon - pad_deg)};
    r.ne = {std::min(90.0, r.ne.lat + pad_deg), std::min(180.0, r.ne.lon + pad_deg)};
  }
  return out;
}

/// `assignment` maps every clustered item id to its cluster id (null for
/// noise); `clusters` lists id, size and centroid.
inline nlohmann::json clustering_to_json(const Clustering& c, const Vocabulary& vocab,
                                         std::string_view context) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& p : c.points()) {
    const auto k = c.item_to_unit(p.item);
    assignment[vocab.items.name(p.item)] = k ? nlohmann::json(k->value) : nlohmann::json(nullptr);
  }
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t k = 0; k < c.size(); ++k) {
    const auto& cl = c.clusters()[k];
    clusters.push_back({{"id", k},
                        {"size", cl.members.size()},
                        {"centroid", {cl.centroid.lat, cl.centroid.lon}}});
  }
  return {{"context", context},
          {"radius_km", c.max_radius_km()},
          {"min_points", c.min_points()},
          {"assignment", std::move(assignment)},
          {"clusters", std::move(clusters)}};
}

inline nlohmann::json recommendation_to_json(const RecommendationList& list, const Model& model) {
  const auto& vocab = model.dataset().vocabulary();
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : list.items)
    items.push_back({{"unit", model.units().unit(r.unit).label},
                     {"score", r.score},
                     {"backfilled", r.backfilled}});
  return {{"user", vocab.users.name(list.query.user)},
          {"context", vocab.contexts.name(list.query.context)},
          {"scheme", scheme_name(list.scheme)},
          {"items", std::move(items)}};
}

}  // namespace georel::io
