#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "diginfer/dbscan.hpp"
#include "diginfer/errors.hpp"
#include "diginfer/rng.hpp"
#include "diginfer/telemetry.hpp"

namespace diginfer {

struct ClusterMoments {
  int cluster_id = 0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  double std_x = 0.0;  // sample standard deviation, divisor n-1
  double std_y = 0.0;
  int n_points = 0;
  double t_mid = 0.0;  // median member timestamp
  double exc_x = 0.0;  // associated excavator feature
  double exc_y = 0.0;
  double mean_z = 0.0;  // reporting only, not a regression target
};

enum class Split { Train, Test };

struct MomentDataset {
  std::vector<ClusterMoments> rows;
  std::vector<Split> split;  // aligned with rows

  std::vector<ClusterMoments> select(Split s) const {
    std::vector<ClusterMoments> out;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (split[i] == s) out.push_back(rows[i]);
    return out;
  }
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Per-cluster mean and sample std of member x and y. The point set must be
// the dig selection of `log` in log order (point id i <-> i-th dig record);
// noise-labeled points are ignored.
inline std::vector<ClusterMoments> compute_moments(const PointSet& ps, const Clustering& c,
                                                   const TelemetryLog& log) {
  const auto digs = select_role(log, Role::BucketDig);
  if (digs.size() != ps.size())
    throw data_error("point set does not match the log's dig records");
  if (c.n_clusters < 1) throw data_error("no clusters to summarize");

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(c.n_clusters));
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (c.labels[i] != kNoiseLabel) members[static_cast<std::size_t>(c.labels[i])].push_back(i);

  std::vector<ClusterMoments> out;
  out.reserve(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto& ids = members[k];
    if (ids.size() < 2)
      throw cluster_too_small("cluster " + std::to_string(k) + " has fewer than 2 points");
    ClusterMoments m;
    m.cluster_id = static_cast<int>(k);
    m.n_points = static_cast<int>(ids.size());

    // Welford accumulation; the test oracle uses a two-pass sum instead.
    double mx = 0, my = 0, mz = 0, sx = 0, sy = 0;
    std::vector<double> times;
    times.reserve(ids.size());
    std::size_t cnt = 0;
    for (std::size_t i : ids) {
      ++cnt;
      const auto& p = ps.coords[i];
      double dx = p[0] - mx;
      mx += dx / static_cast<double>(cnt);
      sx += dx * (p[0] - mx);
      double dy = p[1] - my;
      my += dy / static_cast<double>(cnt);
      sy += dy * (p[1] - my);
      mz += (p[2] - mz) / static_cast<double>(cnt);
      times.push_back(digs[i].timestamp);
    }
    m.mean_x = mx;
    m.mean_y = my;
    m.mean_z = mz;
    m.std_x = std::sqrt(sx / static_cast<double>(ids.size() - 1));
    m.std_y = std::sqrt(sy / static_cast<double>(ids.size() - 1));
    m.t_mid = median(times);
    out.push_back(m);
  }
  return out;
}

// Excavator feature: component-wise median of fixes inside the cluster's
// member-timestamp span, falling back to the fix nearest in time to t_mid.
inline ClusterMoments associate_excavator(ClusterMoments m, double span_min, double span_max,
                                          const TelemetryLog& log) {
  const auto fixes = select_role(log, Role::Excavator);
  if (fixes.empty()) throw no_excavator_data("log contains no excavator records");

  std::vector<double> xs, ys;
  for (const auto& f : fixes) {
    if (f.timestamp >= span_min && f.timestamp <= span_max) {
      xs.push_back(f.x);
      ys.push_back(f.y);
    }
  }
  if (!xs.empty()) {
    m.exc_x = median(xs);
    m.exc_y = median(ys);
    return m;
  }
  const TelemetryRecord* best = &fixes.front();
  for (const auto& f : fixes)
    if (std::abs(f.timestamp - m.t_mid) < std::abs(best->timestamp - m.t_mid)) best = &f;
  m.exc_x = best->x;
  m.exc_y = best->y;
  return m;
}

// Convenience: moments + association for every cluster of a dig clustering.
inline std::vector<ClusterMoments> compute_associated_moments(const PointSet& ps,
                                                              const Clustering& c,
                                                              const TelemetryLog& log) {
  auto rows = compute_moments(ps, c, log);
  const auto digs = select_role(log, Role::BucketDig);
  for (auto& m : rows) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (c.labels[i] == m.cluster_id) {
        lo = std::min(lo, digs[i].timestamp);
        hi = std::max(hi, digs[i].timestamp);
      }
    }
    m = associate_excavator(m, lo, hi, log);
  }
  return rows;
}

// Tags round(fraction * k) rows as Test via seeded sampling without
// replacement (partial Fisher-Yates over row indices).
inline MomentDataset split_random(MomentDataset ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw config_error("fraction must be in (0,1)");
  const std::size_t k = ds.rows.size();
  const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(k)));
  if (n_test == 0) throw degenerate_split("random split selects no test rows");
  if (n_test >= k) throw degenerate_split("random split leaves no training rows");

  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n_test; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(k - i));
    std::swap(idx[i], idx[j]);
  }
  ds.split.assign(k, Split::Train);
  for (std::size_t i = 0; i < n_test; ++i) ds.split[idx[i]] = Split::Test;
  return ds;
}

// Tags rows with t_mid in [t0, t1] as Test.
inline MomentDataset split_window(MomentDataset ds, double t0, double t1) {
  if (!(t0 < t1)) throw config_error("window requires t0 < t1");
  std::size_t n_test = 0;
  ds.split.assign(ds.rows.size(), Split::Train);
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    if (ds.rows[i].t_mid >= t0 && ds.rows[i].t_mid <= t1) {
      ds.split[i] = Split::Test;
      ++n_test;
    }
  }
  if (n_test == 0) throw degenerate_split("window split selects no test rows");
  if (n_test == ds.rows.size()) throw degenerate_split("window split leaves no training rows");
  return ds;
}

inline void save_moments_csv_stream(const MomentDataset& ds, std::ostream& out) {
  out << "cluster_id,n,mean_x,mean_y,std_x,std_y,t_mid,exc_x,exc_y,split\n";
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& m = ds.rows[i];
    out << m.cluster_id << ',' << m.n_points << ',' << format_double(m.mean_x) << ','
        << format_double(m.mean_y) << ',' << format_double(m.std_x) << ','
        << format_double(m.std_y) << ',' << format_double(m.t_mid) << ','
        << format_double(m.exc_x) << ',' << format_double(m.exc_y) << ','
        << (ds.split[i] == Split::Test ? "test" : "train") << '\n';
  }
}

inline void save_moments_csv(const MomentDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  save_moments_csv_stream(ds, out);
}

inline MomentDataset load_moments_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw missing_file(path);
  MomentDataset ds;
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty moments CSV");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != 10)
      throw data_error("moments CSV line " + std::to_string(line_no) + ": expected 10 fields");
    ClusterMoments m;
    auto num = [&](std::size_t i) {
      auto v = parse_double(cols[i]);
      if (!v) throw data_error("moments CSV line " + std::to_string(line_no) + ": bad number");
      return *v;
    };
    m.cluster_id = static_cast<int>(num(0));
    m.n_points = static_cast<int>(num(1));
    m.mean_x = num(2);
    m.mean_y = num(3);
    m.std_x = num(4);
    m.std_y = num(5);
    m.t_mid = num(6);
    m.exc_x = num(7);
    m.exc_y = num(8);
    ds.rows.push_back(m);
    ds.split.push_back(trim(cols[9]) == "test" ? Split::Test : Split::Train);
  }
  return ds;
}

}  // namespace diginfer
