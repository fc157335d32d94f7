#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "diginfer/errors.hpp"

namespace diginfer {

struct PointSet {
  std::vector<std::array<double, 3>> coords;  // unused axis stays 0 for dim 2
  int dim = 3;

  std::size_t size() const { return coords.size(); }

  static PointSet from_xy(const std::vector<std::array<double, 2>>& pts) {
    PointSet ps;
    ps.dim = 2;
    ps.coords.reserve(pts.size());
    for (const auto& p : pts) ps.coords.push_back({p[0], p[1], 0.0});
    return ps;
  }
};

inline double squared_distance(const std::array<double, 3>& a, const std::array<double, 3>& b,
                               int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

// Uniform grid over the point set. DBSCAN only queries at radius eps, so a
// grid with cell_size = eps answers each query from a constant number of
// cells.
class GridIndex {
 public:
  GridIndex(const PointSet& ps, double cell_size) : cell_size_(cell_size), dim_(ps.dim) {
    if (!(cell_size > 0.0)) throw config_error("cell_size must be positive");
    for (std::size_t i = 0; i < ps.size(); ++i)
      buckets_[cell_of(ps.coords[i])].push_back(static_cast<int>(i));
  }

  std::size_t bucket_count() const { return buckets_.size(); }

  // Ids with Euclidean distance <= r from center (closed ball), ascending.
  std::vector<int> query_radius(const PointSet& ps, const std::array<double, 3>& center,
                                double r) const {
    if (!(r > 0.0)) throw config_error("query radius must be positive");
    const double r2 = r * r;
    const int reach = static_cast<int>(std::ceil(r / cell_size_));
    const auto c0 = cell_of(center);
    std::vector<int> out;
    std::array<std::int64_t, 3> cell = c0;
    const int zr = dim_ == 3 ? reach : 0;
    for (std::int64_t dx = -reach; dx <= reach; ++dx) {
      cell[0] = c0[0] + dx;
      for (std::int64_t dy = -reach; dy <= reach; ++dy) {
        cell[1] = c0[1] + dy;
        for (std::int64_t dz = -zr; dz <= zr; ++dz) {
          cell[2] = dim_ == 3 ? c0[2] + dz : 0;
          auto it = buckets_.find(cell);
          if (it == buckets_.end()) continue;
          for (int id : it->second)
            if (squared_distance(ps.coords[static_cast<std::size_t>(id)], center, dim_) <= r2)
              out.push_back(id);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct CellHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
      std::uint64_t h = 0x9e3779b97f4a7c15ull;
      for (std::int64_t v : c) {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };

  std::array<std::int64_t, 3> cell_of(const std::array<double, 3>& p) const {
    std::array<std::int64_t, 3> c{0, 0, 0};
    for (int d = 0; d < dim_; ++d)
      c[static_cast<std::size_t>(d)] = static_cast<std::int64_t>(std::floor(p[static_cast<std::size_t>(d)] / cell_size_));
    return c;
  }

  double cell_size_;
  int dim_;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<int>, CellHash> buckets_;
};

}  // namespace diginfer
