#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "georel/geo.hpp"
#include "georel/ids.hpp"

namespace georel {

struct ClusterTag {};
using ClusterId = DenseId<ClusterTag>;

struct ClusterPoint {
  ItemId item;
  Coordinate location;
};

/// Uniform lat/lon grid whose cells are at least `radius_km` wide in
/// great-circle terms, so every point within the radius lies in the 3x3 block
/// around the query cell. Longitude wraps at the antimeridian.
class GeoGrid {
 public:
  GeoGrid() = default;

  GeoGrid(std::span<const Coordinate> points, double radius_km)
      : points_(points.begin(), points.end()), radius_km_(radius_km) {
    const double half_angle = std::sin(radius_km / (2.0 * kEarthRadiusKm));
    lat_step_ = radius_km / kEarthRadiusKm * 180.0 / std::numbers::pi * kSlack;
    double max_abs_lat = 0.0;
    for (const auto& p : points_) max_abs_lat = std::max(max_abs_lat, std::abs(p.lat));
    const double c = std::cos(deg_to_rad(max_abs_lat));
    // sin(dlon/2) <= sin(r/2R) / sqrt(cos(lat1) cos(lat2)) bounds the
    // longitude gap of any pair within the radius
    if (c > 0.0 && half_angle / c < 1.0) {
      const double lon_step =
          2.0 * std::asin(half_angle / c) * 180.0 / std::numbers::pi * kSlack;
      lon_cells_ = static_cast<std::int64_t>(std::floor(360.0 / lon_step));
    }
    if (lon_cells_ < 3) lon_cells_ = 1;  // degenerate: one longitude band
    lon_step_ = 360.0 / static_cast<double>(lon_cells_);
    for (std::size_t i = 0; i < points_.size(); ++i)
      cells_[key(lat_cell(points_[i].lat), lon_cell(points_[i].lon))].push_back(i);
  }

  /// Indices of points within radius_km of `q` (inclusive), ascending.
  std::vector<std::size_t> within(const Coordinate& q) const {
    std::vector<std::size_t> out;
    const std::int64_t la = lat_cell(q.lat);
    const std::int64_t lo = lon_cell(q.lon);
    const std::int64_t lon_span = lon_cells_ >= 3 ? 1 : 0;
    for (std::int64_t dla = -1; dla <= 1; ++dla) {
      for (std::int64_t dlo = -lon_span; dlo <= lon_span; ++dlo) {
        const std::int64_t wrapped = ((lo + dlo) % lon_cells_ + lon_cells_) % lon_cells_;
        auto it = cells_.find(key(la + dla, wrapped));
        if (it == cells_.end()) continue;
        for (std::size_t j : it->second)
          if (haversine_km(q, points_[j]) <= radius_km_) out.push_back(j);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const Coordinate& point(std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }

 private:
  static constexpr double kSlack = 1.0 + 1e-9;

  std::int64_t lat_cell(double lat) const {
    return static_cast<std::int64_t>(std::floor((lat + 90.0) / lat_step_));
  }
  std::int64_t lon_cell(double lon) const {
    auto c = static_cast<std::int64_t>(std::floor((lon + 180.0) / lon_step_));
    return ((c % lon_cells_) + lon_cells_) % lon_cells_;
  }
  struct CellKey {
    std::int64_t lat;
    std::int64_t lon;
    friend bool operator==(const CellKey&, const CellKey&) = default;
  };
  struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept {
      const auto h = static_cast<std::uint64_t>(k.lat) * 0x9E3779B97F4A7C15ULL;
      return static_cast<std::size_t>(h ^ (static_cast<std::uint64_t>(k.lon) + (h << 6) + (h >> 2)));
    }
  };
  static CellKey key(std::int64_t la, std::int64_t lo) { return {la, lo}; }

  std::vector<Coordinate> points_;
  double radius_km_{0.0};
  double lat_step_{1.0};
  double lon_step_{360.0};
  std::int64_t lon_cells_{1};
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

struct Cluster {
  std::vector<ItemId> members;  // ascending
  Coordinate centroid;
};

/// Result of a DBSCAN run. Noise items have no cluster.
class Clustering {
 public:
  Clustering() = default;

  double max_radius_km() const { return max_radius_km_; }
  std::size_t min_points() const { return min_points_; }
  std::span<const Cluster> clusters() const { return clusters_; }
  std::size_t size() const { return clusters_.size(); }

  /// Cluster of `item`; absent for noise and for items not clustered here.
  std::optional<ClusterId> item_to_unit(ItemId item) const {
    const auto pos = position(item);
    if (!pos || !labels_[*pos].valid()) return std::nullopt;
    return labels_[*pos];
  }

  bool is_core(ItemId item) const {
    const auto pos = position(item);
    return pos && core_[*pos];
  }

  /// Cluster of the nearest core point within max_radius_km of `where`, i.e.
  /// the cluster a new point at `where` would be density-reachable from.
  std::optional<ClusterId> locate(const Coordinate& where) const {
    std::optional<ClusterId> best;
    double best_d = 0.0;
    for (std::size_t j : grid_.within(where)) {
      if (!core_[j] || !labels_[j].valid()) continue;
      const double d = haversine_km(where, grid_.point(j));
      if (!best || d < best_d) {
        best = labels_[j];
        best_d = d;
      }
    }
    return best;
  }

  /// (item, location) pairs in visit order (ascending item).
  std::span<const ClusterPoint> points() const { return points_; }

 private:
  friend Clustering dbscan(std::span<const ClusterPoint>, double, std::size_t);

  std::optional<std::size_t> position(ItemId item) const {
    auto it = std::lower_bound(
        points_.begin(), points_.end(), item,
        [](const ClusterPoint& p, ItemId i) { return p.item < i; });
    if (it == points_.end() || it->item != item) return std::nullopt;
    return static_cast<std::size_t>(it - points_.begin());
  }

  double max_radius_km_{0.0};
  std::size_t min_points_{1};
  std::vector<ClusterPoint> points_;
  std::vector<ClusterId> labels_;
  std::vector<bool> core_;
  std::vector<Cluster> clusters_;
  GeoGrid grid_;
};

/// DBSCAN under the haversine metric. Points are visited in ascending item
/// order; a border point reachable from several clusters stays with the first
/// one that reaches it. Clusters left with fewer than `min_points` members
/// after losing contested border points are dissolved into noise.
inline Clustering dbscan(std::span<const ClusterPoint> input, double max_radius_km,
                         std::size_t min_points) {
  if (!(max_radius_km > 0.0)) throw std::invalid_argument("max_radius_km must be positive");
  if (min_points < 1) throw std::invalid_argument("min_points must be at least 1");

  Clustering out;
  out.max_radius_km_ = max_radius_km;
  out.min_points_ = min_points;
  out.points_.assign(input.begin(), input.end());
  std::sort(out.points_.begin(), out.points_.end(),
            [](const ClusterPoint& a, const ClusterPoint& b) { return a.item < b.item; });
  for (std::size_t i = 1; i < out.points_.size(); ++i)
    if (out.points_[i].item == out.points_[i - 1].item)
      throw std::invalid_argument("duplicate item in clustering input");

  const std::size_t n = out.points_.size();
  std::vector<Coordinate> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = out.points_[i].location;
  out.grid_ = GeoGrid(coords, max_radius_km);

  constexpr std::int64_t kUnvisited = -2;
  constexpr std::int64_t kNoise = -1;
  std::vector<std::int64_t> label(n, kUnvisited);
  out.core_.assign(n, false);
  std::int64_t next = 0;

  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    auto seeds = out.grid_.within(coords[p]);
    if (seeds.size() < min_points) {
      label[p] = kNoise;
      continue;
    }
    const std::int64_t c = next++;
    label[p] = c;
    out.core_[p] = true;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) label[q] = c;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = c;
      auto reach = out.grid_.within(coords[q]);
      if (reach.size() >= min_points) {
        out.core_[q] = true;
        queue.insert(queue.end(), reach.begin(), reach.end());
      }
    }
  }

  std::vector<std::size_t> sizes(static_cast<std::size_t>(next), 0);
  for (auto l : label)
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  std::vector<std::int64_t> remap(static_cast<std::size_t>(next), kNoise);
  std::size_t kept = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c)
    if (sizes[c] >= min_points) remap[c] = static_cast<std::int64_t>(kept++);

  out.labels_.assign(n, ClusterId{});
  out.clusters_.assign(kept, {});
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] < 0) continue;
    const auto r = remap[static_cast<std::size_t>(label[i])];
    if (r < 0) {
      out.core_[i] = false;
      continue;
    }
    out.labels_[i] = ClusterId{static_cast<std::size_t>(r)};
    out.clusters_[static_cast<std::size_t>(r)].members.push_back(out.points_[i].item);
  }
  for (auto& cluster : out.clusters_) {
    std::vector<Coordinate> member_coords;
    member_coords.reserve(cluster.members.size());
    for (ItemId item : cluster.members)
      member_coords.push_back(out.points_[*out.position(item)].location);
    cluster.centroid = centroid(member_coords);
  }
  return out;
}

}  // namespace georel
