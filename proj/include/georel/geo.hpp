#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

namespace georel {

// IUGG mean Earth radius, km.
inline constexpr double kEarthRadiusKm = 6371.0088;

struct Coordinate {
  double lat{0.0};
  double lon{0.0};

  friend bool operator==(const Coordinate&, const Coordinate&) = default;
};

inline bool is_valid(const Coordinate& c) {
  return std::isfinite(c.lat) && std::isfinite(c.lon) && c.lat >= -90.0 &&
         c.lat <= 90.0 && c.lon >= -180.0 && c.lon <= 180.0;
}

inline constexpr double deg_to_rad(double deg) {
  return deg * std::numbers::pi / 180.0;
}

/// Great-circle distance in kilometers on a sphere of radius kEarthRadiusKm.
inline double haversine_km(const Coordinate& a, const Coordinate& b) {
  const double lat_a = deg_to_rad(a.lat);
  const double lat_b = deg_to_rad(b.lat);
  const double s_lat = std::sin((lat_b - lat_a) / 2.0);
  const double s_lon = std::sin(deg_to_rad(b.lon - a.lon) / 2.0);
  double h = s_lat * s_lat + std::cos(lat_a) * std::cos(lat_b) * s_lon * s_lon;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

/// Arithmetic mean of latitudes and longitudes. Only meaningful for point
/// sets that do not wrap the antimeridian or approach a pole.
inline Coordinate centroid(std::span<const Coordinate> points) {
  if (points.empty()) throw std::invalid_argument("empty point set");
  double lat = 0.0;
  double lon = 0.0;
  for (const auto& p : points) {
    lat += p.lat;
    lon += p.lon;
  }
  const auto n = static_cast<double>(points.size());
  return {lat / n, lon / n};
}

/// Axis-aligned lat/lon box. Antimeridian-crossing boxes are not representable.
struct BoundingBox {
  Coordinate sw;
  Coordinate ne;

  bool contains(const Coordinate& c) const {
    return c.lat >= sw.lat && c.lat <= ne.lat && c.lon >= sw.lon &&
           c.lon <= ne.lon;
  }
  bool is_valid() const {
    return georel::is_valid(sw) && georel::is_valid(ne) && sw.lat <= ne.lat &&
           sw.lon <= ne.lon;
  }
};

// Regions whose corner-to-corner diagonal is below this are degenerate.
inline constexpr double kMinRegionDiagonalKm = 0.01;

/// Largest distance between two points of the box, taken as the
/// south-west to north-east diagonal.
inline double d_max(const BoundingBox& region) {
  const double d = haversine_km(region.sw, region.ne);
  if (!(d >= kMinRegionDiagonalKm))
    throw std::invalid_argument("degenerate context region");
  return d;
}

}  // namespace georel
