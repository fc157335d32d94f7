#pragma once

#include <deque>
#include <fstream>
#include <ostream>
#include <vector>

#include "diginfer/errors.hpp"
#include "diginfer/spatial_index.hpp"
#include "diginfer/util.hpp"

namespace diginfer {

inline constexpr int kNoiseLabel = -1;

struct DbscanParams {
  double eps = 2.5;
  int min_pts = 5;
};

struct Clustering {
  std::vector<int> labels;      // kNoiseLabel or 0..n_clusters-1
  std::vector<char> core_flags;
  int n_clusters = 0;
};

// Density-based clustering. A point is core iff its closed eps-ball holds at
// least min_pts points (itself included). Clusters are connected components
// of core points under the eps relation, plus non-core points within eps of a
// core point; everything else is noise. Cluster ids follow first discovery by
// ascending point index. A border point reachable from several clusters goes
// to the cluster of its smallest-index qualifying core point, which makes the
// labeling permutation-invariant.
inline Clustering dbscan(const PointSet& ps, const DbscanParams& params) {
  if (!(params.eps > 0.0)) throw config_error("eps must be positive");
  if (params.min_pts < 1) throw config_error("min_pts must be >= 1");

  const std::size_t n = ps.size();
  Clustering c;
  c.labels.assign(n, kNoiseLabel);
  c.core_flags.assign(n, 0);
  if (n == 0) return c;

  GridIndex index(ps, params.eps);
  std::vector<std::vector<int>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i] = index.query_radius(ps, ps.coords[i], params.eps);
    if (static_cast<int>(neighbors[i].size()) >= params.min_pts) c.core_flags[i] = 1;
  }

  // Expand clusters over core points only.
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.core_flags[i] || c.labels[i] != kNoiseLabel) continue;
    const int cluster = c.n_clusters++;
    std::deque<int> frontier{static_cast<int>(i)};
    c.labels[i] = cluster;
    while (!frontier.empty()) {
      int p = frontier.front();
      frontier.pop_front();
      for (int q : neighbors[static_cast<std::size_t>(p)]) {
        if (c.core_flags[static_cast<std::size_t>(q)] && c.labels[static_cast<std::size_t>(q)] == kNoiseLabel) {
          c.labels[static_cast<std::size_t>(q)] = cluster;
          frontier.push_back(q);
        }
      }
    }
  }

  // Attach border points; neighbors are sorted so the first core hit is the
  // smallest-index one.
  for (std::size_t i = 0; i < n; ++i) {
    if (c.core_flags[i]) continue;
    for (int q : neighbors[i]) {
      if (c.core_flags[static_cast<std::size_t>(q)]) {
        c.labels[i] = c.labels[static_cast<std::size_t>(q)];
        break;
      }
    }
  }
  return c;
}

struct StrippedClustering {
  PointSet points;
  Clustering clustering;
  std::vector<int> original_ids;  // stripped index -> index in the input set
};

// Drops noise points, keeping labels (already contiguous in discovery order).
inline StrippedClustering strip_noise(const PointSet& ps, const Clustering& c) {
  StrippedClustering out;
  out.points.dim = ps.dim;
  out.clustering.n_clusters = c.n_clusters;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (c.labels[i] == kNoiseLabel) continue;
    out.points.coords.push_back(ps.coords[i]);
    out.clustering.labels.push_back(c.labels[i]);
    out.clustering.core_flags.push_back(c.core_flags[i]);
    out.original_ids.push_back(static_cast<int>(i));
  }
  return out;
}

inline void save_clusters_csv_stream(const PointSet& ps, const Clustering& c, std::ostream& out) {
  out << "point_id,x,y,z,label\n";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    out << i << ',' << format_double(ps.coords[i][0]) << ',' << format_double(ps.coords[i][1])
        << ',' << format_double(ps.coords[i][2]) << ',' << c.labels[i] << '\n';
  }
}

inline void save_clusters_csv(const PointSet& ps, const Clustering& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  save_clusters_csv_stream(ps, c, out);
}

}  // namespace diginfer
