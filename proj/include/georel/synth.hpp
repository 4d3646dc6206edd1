#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "georel/dataset.hpp"
#include "georel/partonomy.hpp"

namespace georel {

/// Generator of geotagged photo traces with planted structure. Users belong to
/// archetypes; an archetype favors a few POIs in every city (preference
/// concentration) and a few cities to travel to (cross-context consistency).
struct SynthConfig {
  std::size_t countries{2};
  std::size_t states_per_country{3};
  std::size_t cities_per_state{4};
  std::size_t pois_per_city{30};
  double poi_spacing_km{4.0};
  double photo_spread_km{0.15};

  std::size_t users{2000};
  std::size_t archetypes{8};
  double archetype_skew{0.8};  // Zipf exponent of archetype sizes
  std::size_t favorites_per_city{6};

  // Probability that a photo in the evaluation city lands on a favorite POI.
  double concentration{0.9};
  // Same, for photos taken in other cities.
  double foreign_concentration{0.0};

  std::size_t preferred_cities{3};
  // Probability that a visited foreign city is one of the archetype's.
  double consistency{0.9};
  std::size_t foreign_cities_min{1};
  std::size_t foreign_cities_max{3};
  std::size_t foreign_photos_max{3};

  double mean_eval_photos{3.5};
  // Users without any photo in the evaluation city.
  double cold_fraction{0.0};
  // Share of photos scattered uniformly over the city instead of at a POI.
  double noise_fraction{0.02};

  // Clustering parameters the output must support.
  double radius_km{1.0};
  std::size_t min_points{3};
};

struct SynthData {
  std::vector<EventRecord> events;
  std::vector<GeoContext> contexts;
  Partonomy partonomy;  // country > state > city; units attach below cities
  std::string eval_context;
  Dataset dataset;
  std::vector<std::size_t> archetype;  // by generated user index
};

inline void validate(const SynthConfig& c) {
  auto fail = [](const std::string& why) { throw std::invalid_argument("synth config: " + why); };
  auto prob = [&](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(std::string(name) + " must lie in [0, 1]");
  };
  prob(c.concentration, "concentration");
  prob(c.foreign_concentration, "foreign_concentration");
  prob(c.consistency, "consistency");
  prob(c.cold_fraction, "cold_fraction");
  prob(c.noise_fraction, "noise_fraction");
  const std::size_t cities = c.countries * c.states_per_country * c.cities_per_state;
  if (cities < 1 || c.users < 1 || c.archetypes < 1 || c.pois_per_city < 1)
    fail("counts must be positive");
  if (c.favorites_per_city < 1 || c.favorites_per_city > c.pois_per_city)
    fail("favorites_per_city must lie in [1, pois_per_city]");
  if (c.preferred_cities > cities - 1) fail("preferred_cities exceeds the number of other cities");
  if (c.foreign_cities_min > c.foreign_cities_max || c.foreign_cities_max > cities - 1)
    fail("foreign city range is inconsistent");
  if (c.foreign_cities_max > 0 && c.foreign_photos_max < 1) fail("foreign_photos_max must be positive");
  if (!(c.mean_eval_photos >= 1.0)) fail("mean_eval_photos must be at least 1");
  if (!(c.radius_km > 0.0) || c.min_points < 1) fail("invalid clustering parameters");
  if (!(c.photo_spread_km > 0.0)) fail("photo_spread_km must be positive");
  if (c.poi_spacing_km < 2.0 * c.radius_km + 8.0 * c.photo_spread_km)
    fail("poi_spacing_km too small to keep POI clusters apart");
  const double per_poi = static_cast<double>(c.users) * (1.0 - c.cold_fraction) *
                         c.mean_eval_photos / static_cast<double>(c.pois_per_city);
  if (per_poi < static_cast<double>(c.min_points))
    fail("expected photos per POI fall below min_points");
}

inline SynthData synth_dataset(const SynthConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;

  SynthData out;
  struct City {
    std::string id;
    Coordinate center;
    std::vector<Coordinate> pois;
    BoundingBox box;
  };
  std::vector<City> cities;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(cfg.pois_per_city))));
  const std::size_t rows = (cfg.pois_per_city + cols - 1) / cols;
  const double width_km = static_cast<double>(cols + 1) * cfg.poi_spacing_km;
  const double height_km = static_cast<double>(rows + 1) * cfg.poi_spacing_km;

  for (std::size_t a = 0; a < cfg.countries; ++a) {
    const NodeId country = out.partonomy.add_node("country-" + std::to_string(a),
                                                  "Country " + std::to_string(a), 3);
    for (std::size_t b = 0; b < cfg.states_per_country; ++b) {
      const std::string sid = std::to_string(a) + "-" + std::to_string(b);
      const NodeId state = out.partonomy.add_node("state-" + sid, "State " + sid, 2, country);
      for (std::size_t c = 0; c < cfg.cities_per_state; ++c) {
        const std::size_t idx = cities.size();
        City city;
        city.id = "city-" + sid + "-" + std::to_string(c);
        city.center = {-35.0 + 7.0 * static_cast<double>(idx / 8),
                       -120.0 + 9.0 * static_cast<double>(idx % 8)};
        const double dlat = height_km / 2.0 / km_per_deg;
        const double km_per_deg_lon = km_per_deg * std::cos(deg_to_rad(city.center.lat));
        const double dlon = width_km / 2.0 / km_per_deg_lon;
        city.box = {{city.center.lat - dlat, city.center.lon - dlon},
                    {city.center.lat + dlat, city.center.lon + dlon}};
        for (std::size_t p = 0; p < cfg.pois_per_city; ++p) {
          const double jitter = 0.1 * cfg.poi_spacing_km;
          const double x = (static_cast<double>(p % cols) + 1.0) * cfg.poi_spacing_km - width_km / 2.0 +
                           (unit(rng) * 2.0 - 1.0) * jitter;
          const double y = (static_cast<double>(p / cols) + 1.0) * cfg.poi_spacing_km - height_km / 2.0 +
                           (unit(rng) * 2.0 - 1.0) * jitter;
          city.pois.push_back({city.center.lat + y / km_per_deg, city.center.lon + x / km_per_deg_lon});
        }
        out.partonomy.add_node(city.id, "City " + sid + "-" + std::to_string(c), 1, state);
        out.contexts.push_back({city.id, "City " + sid + "-" + std::to_string(c), city.box});
        cities.push_back(std::move(city));
      }
    }
  }
  out.eval_context = cities.front().id;
  const std::size_t n_cities = cities.size();

  auto sample_distinct = [&rng](std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(k, n));
    return idx;
  };

  // archetype -> favorite POIs per city, preferred foreign cities
  std::vector<std::vector<std::vector<std::size_t>>> favorites(cfg.archetypes);
  std::vector<std::vector<std::size_t>> preferred(cfg.archetypes);
  for (std::size_t a = 0; a < cfg.archetypes; ++a) {
    for (std::size_t c = 0; c < n_cities; ++c)
      favorites[a].push_back(sample_distinct(cfg.pois_per_city, cfg.favorites_per_city));
    for (std::size_t c : sample_distinct(n_cities - 1, cfg.preferred_cities)) preferred[a].push_back(c + 1);
  }
  std::vector<double> sizes(cfg.archetypes);
  for (std::size_t a = 0; a < cfg.archetypes; ++a)
    sizes[a] = 1.0 / std::pow(static_cast<double>(a + 1), cfg.archetype_skew);
  std::discrete_distribution<std::size_t> pick_archetype(sizes.begin(), sizes.end());
  std::geometric_distribution<std::size_t> extra_eval(1.0 / cfg.mean_eval_photos);
  std::uniform_int_distribution<std::size_t> foreign_count(cfg.foreign_cities_min, cfg.foreign_cities_max);
  std::uniform_int_distribution<std::size_t> foreign_photos(1, std::max<std::size_t>(1, cfg.foreign_photos_max));

  std::size_t photo = 0;
  std::int64_t clock = 1'300'000'000;
  auto shoot = [&](std::size_t user, std::size_t city, std::size_t poi) {
    const City& c = cities[city];
    Coordinate where;
    if (unit(rng) < cfg.noise_fraction) {
      where = {c.box.sw.lat + unit(rng) * (c.box.ne.lat - c.box.sw.lat),
               c.box.sw.lon + unit(rng) * (c.box.ne.lon - c.box.sw.lon)};
    } else {
      const Coordinate& p = c.pois[poi];
      const double km_per_deg_lon = km_per_deg * std::cos(deg_to_rad(p.lat));
      where = {p.lat + gauss(rng) * cfg.photo_spread_km / km_per_deg,
               p.lon + gauss(rng) * cfg.photo_spread_km / km_per_deg_lon};
    }
    out.events.push_back({"u" + std::to_string(user), "p" + std::to_string(photo++), where, c.id,
                          clock += 60});
  };
  // distinct POIs, each drawn from the favorites with probability `conc`
  std::vector<std::size_t> all_pois(cfg.pois_per_city);
  std::iota(all_pois.begin(), all_pois.end(), 0);
  auto choose_pois = [&](const std::vector<std::size_t>& favs, double conc, std::size_t k) {
    std::vector<std::size_t> chosen;
    k = std::min(k, cfg.pois_per_city);
    while (chosen.size() < k) {
      std::vector<std::size_t> pool;
      auto fill = [&](const std::vector<std::size_t>& from) {
        for (std::size_t p : from)
          if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) pool.push_back(p);
      };
      if (unit(rng) < conc) fill(favs);
      if (pool.empty()) fill(all_pois);
      chosen.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]);
    }
    return chosen;
  };

  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::size_t a = pick_archetype(rng);
    out.archetype.push_back(a);
    if (!(unit(rng) < cfg.cold_fraction)) {
      const std::size_t k = 1 + extra_eval(rng);
      for (std::size_t poi : choose_pois(favorites[a][0], cfg.concentration, k)) shoot(u, 0, poi);
    }
    const std::size_t m = foreign_count(rng);
    std::vector<std::size_t> visited;
    while (visited.size() < m) {
      std::size_t city;
      if (!preferred[a].empty() && unit(rng) < cfg.consistency)
        city = preferred[a][std::uniform_int_distribution<std::size_t>(0, preferred[a].size() - 1)(rng)];
      else
        city = 1 + std::uniform_int_distribution<std::size_t>(0, n_cities - 2)(rng);
      if (std::find(visited.begin(), visited.end(), city) != visited.end()) {
        // preferred set may be exhausted; fall back to any unvisited city
        if (visited.size() >= preferred[a].size()) {
          city = 1 + std::uniform_int_distribution<std::size_t>(0, n_cities - 2)(rng);
          if (std::find(visited.begin(), visited.end(), city) != visited.end()) continue;
        } else {
          continue;
        }
      }
      visited.push_back(city);
      for (std::size_t poi : choose_pois(favorites[a][city], cfg.foreign_concentration, foreign_photos(rng)))
        shoot(u, city, poi);
    }
  }

  auto ingested = ingest(out.events, std::span<const GeoContext>(out.contexts));
  out.dataset = std::move(ingested.dataset);
  return out;
}

}  // namespace georel
