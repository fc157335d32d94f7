#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <variant>
#include <vector>

#include "diginfer/errors.hpp"
#include "diginfer/moments.hpp"
#include "diginfer/rng.hpp"
#include "diginfer/telemetry.hpp"

namespace diginfer {

struct SimulatedCluster {
  int cluster_id = 0;
  std::vector<std::array<double, 2>> points;
  ClusterMoments source_moments;
};

// Draws n points with independent axis normals around the cluster's inferred
// moments. The stream is keyed by (seed, cluster_id) so per-cluster output is
// independent of processing order.
inline SimulatedCluster simulate_cluster(const ClusterMoments& m, int n, std::uint64_t seed) {
  if (n < 1) throw config_error("simulate_cluster needs n >= 1");
  if (m.std_x < 0.0 || m.std_y < 0.0) throw config_error("negative std in cluster moments");
  SimulatedCluster out;
  out.cluster_id = m.cluster_id;
  out.source_moments = m;
  Rng rng(mix_seeds(seed, static_cast<std::uint64_t>(m.cluster_id)));
  out.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = m.mean_x + m.std_x * rng.normal();
    double y = m.mean_y + m.std_y * rng.normal();
    out.points.push_back({x, y});
  }
  return out;
}

// Median training-cluster size; even counts use the mean of the middle two,
// rounded to the nearest integer. Never below 1.
inline int choose_sim_count(const MomentDataset& ds) {
  const auto train = ds.select(Split::Train);
  if (train.empty()) throw degenerate_split("no training rows to size the simulation");
  std::vector<double> sizes;
  sizes.reserve(train.size());
  for (const auto& m : train) sizes.push_back(static_cast<double>(m.n_points));
  return std::max(1, static_cast<int>(std::llround(median(sizes))));
}

enum class PathKind { Line, Arc, SCurve };

struct SynthConfig {
  int n_stations = 12;
  int digs_per_station = 10;
  double station_spacing = 15.0;  // meters along the path
  PathKind path_kind = PathKind::SCurve;
  double dig_spread_x = 1.0;
  double dig_spread_y = 1.0;
  double excavator_offset = 8.0;  // perpendicular, machine side
  double dump_offset = 20.0;      // perpendicular, truck side
  double fix_interval = 10.0;     // seconds between excavator fixes
  double gps_noise = 0.5;         // meters, isotropic
  std::uint64_t seed = 0;

  double dig_interval = 30.0;  // seconds between digs at a station
  double bench_z0 = 100.0;
  double bench_z_step = 0.5;  // elevation drop per station
};

struct StationTruth {
  ClusterMoments moments;  // true station moments and excavator feature
  double t_begin = 0.0;    // dwell window of this station
  double t_end = 0.0;
  double z = 0.0;
};

struct SyntheticBench {
  TelemetryLog log;
  std::vector<StationTruth> truth;
};

namespace detail {

struct PathPoint {
  double x, y;
  double heading;  // radians
};

// Arc-length parameterized excavation path. Arc and SCurve bend with a radius
// chosen so the whole path spans a quarter/half turn regardless of length.
inline PathPoint path_at(PathKind kind, double s, double total_len) {
  const double len = std::max(total_len, 1e-9);
  switch (kind) {
    case PathKind::Line:
      return {s, 0.0, 0.0};
    case PathKind::Arc: {
      const double radius = len / std::numbers::pi;  // half turn overall
      const double theta = s / radius;
      return {radius * std::sin(theta), radius * (1.0 - std::cos(theta)), theta};
    }
    case PathKind::SCurve:
    default: {
      const double radius = len / std::numbers::pi;  // quarter turn each way
      if (s <= 0.5 * len) {
        const double theta = s / radius;
        return {radius * std::sin(theta), radius * (1.0 - std::cos(theta)), theta};
      }
      const double u = s - 0.5 * len;
      const double phi = std::numbers::pi - u / radius;  // clockwise about (2R, R)
      return {2.0 * radius + radius * std::cos(phi), radius + radius * std::sin(phi),
              std::numbers::pi / 2.0 - u / radius};
    }
  }
}

}  // namespace detail

// Seeded stand-in for real mine telemetry: an excavator walks the path,
// pausing at equally spaced stations; each station contributes a Gaussian
// blob of digs, a dump blob offset to the other side, and noisy GPS fixes.
inline SyntheticBench generate_synthetic_bench(const SynthConfig& cfg) {
  if (cfg.n_stations < 1 || cfg.digs_per_station < 1)
    throw config_error("station and dig counts must be >= 1");
  if (cfg.station_spacing < 0 || cfg.dig_spread_x < 0 || cfg.dig_spread_y < 0 ||
      cfg.gps_noise < 0)
    throw config_error("spacings and spreads must be non-negative");

  SyntheticBench bench;
  const double total_len = cfg.station_spacing * std::max(1, cfg.n_stations - 1);
  const double dwell = cfg.dig_interval * cfg.digs_per_station;

  Rng dig_rng(mix_seeds(cfg.seed, 0xd16));
  Rng dump_rng(mix_seeds(cfg.seed, 0xd0b));
  Rng fix_rng(mix_seeds(cfg.seed, 0xf17));

  for (int k = 0; k < cfg.n_stations; ++k) {
    const double s = cfg.station_spacing * k;
    auto at = detail::path_at(cfg.path_kind, s, total_len);
    const double nx = -std::sin(at.heading);  // left normal
    const double ny = std::cos(at.heading);
    const double z = cfg.bench_z0 - cfg.bench_z_step * k;
    const double t0 = dwell * k;

    StationTruth st;
    st.moments.cluster_id = k;
    st.moments.mean_x = at.x;
    st.moments.mean_y = at.y;
    st.moments.std_x = cfg.dig_spread_x;
    st.moments.std_y = cfg.dig_spread_y;
    st.moments.n_points = cfg.digs_per_station;
    st.moments.t_mid = t0 + 0.5 * dwell;
    st.moments.exc_x = at.x + cfg.excavator_offset * nx;
    st.moments.exc_y = at.y + cfg.excavator_offset * ny;
    st.moments.mean_z = z;
    st.t_begin = t0;
    st.t_end = t0 + dwell;
    st.z = z;
    bench.truth.push_back(st);

    for (int j = 0; j < cfg.digs_per_station; ++j) {
      TelemetryRecord dig;
      dig.timestamp = t0 + (j + 0.5) * cfg.dig_interval;
      dig.x = at.x + cfg.dig_spread_x * dig_rng.normal();
      dig.y = at.y + cfg.dig_spread_y * dig_rng.normal();
      dig.z = z;
      dig.role = Role::BucketDig;
      bench.log.records.push_back(dig);

      TelemetryRecord dump;
      dump.timestamp = dig.timestamp + 0.5 * cfg.dig_interval;
      dump.x = at.x - cfg.dump_offset * nx + 0.5 * dump_rng.normal();
      dump.y = at.y - cfg.dump_offset * ny + 0.5 * dump_rng.normal();
      dump.z = z;
      dump.role = Role::BucketDump;
      bench.log.records.push_back(dump);
    }
  }

  const double t_total = dwell * cfg.n_stations;
  for (double t = 0.0; t < t_total; t += cfg.fix_interval) {
    const int k = std::min(cfg.n_stations - 1, static_cast<int>(t / dwell));
    const auto& st = bench.truth[static_cast<std::size_t>(k)];
    TelemetryRecord fix;
    fix.timestamp = t;
    fix.x = st.moments.exc_x + cfg.gps_noise * fix_rng.normal();
    fix.y = st.moments.exc_y + cfg.gps_noise * fix_rng.normal();
    fix.z = 0.0;
    fix.z_unused = true;
    fix.role = Role::Excavator;
    bench.log.records.push_back(fix);
  }

  std::stable_sort(bench.log.records.begin(), bench.log.records.end(),
                   [](const TelemetryRecord& a, const TelemetryRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return bench;
}

struct DropRandomClusters {
  double fraction = 0.25;
  std::uint64_t seed = 0;
};

struct DropWindow {
  double t0 = 0.0;
  double t1 = 0.0;
};

using DropoutMode = std::variant<DropRandomClusters, DropWindow>;

struct DropoutResult {
  TelemetryLog log;
  std::vector<std::size_t> dropped_record_ids;  // indices into the input log
};

// Removes BucketDig records only; excavator fixes (and dumps) persist.
// RandomClusters needs station dwell windows to know which digs belong where.
inline DropoutResult apply_dropout(const TelemetryLog& log, const DropoutMode& mode,
                                   const std::vector<StationTruth>& stations = {}) {
  std::vector<char> drop(log.records.size(), 0);

  if (const auto* w = std::get_if<DropWindow>(&mode)) {
    if (!(w->t0 < w->t1)) throw config_error("dropout window requires t0 < t1");
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      const auto& r = log.records[i];
      if (r.role == Role::BucketDig && r.timestamp >= w->t0 && r.timestamp <= w->t1) drop[i] = 1;
    }
  } else {
    const auto& rc = std::get<DropRandomClusters>(mode);
    if (!(rc.fraction > 0.0 && rc.fraction < 1.0)) throw config_error("fraction must be in (0,1)");
    if (stations.empty()) throw config_error("random-cluster dropout needs station windows");
    const std::size_t n = stations.size();
    const auto n_drop = static_cast<std::size_t>(std::llround(rc.fraction * static_cast<double>(n)));
    if (n_drop == 0 || n_drop >= n) throw degenerate_split("dropout fraction degenerate");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(rc.seed);
    for (std::size_t i = 0; i < n_drop; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < n_drop; ++i) {
      const auto& st = stations[idx[i]];
      for (std::size_t r = 0; r < log.records.size(); ++r) {
        const auto& rec = log.records[r];
        if (rec.role == Role::BucketDig && rec.timestamp >= st.t_begin && rec.timestamp <= st.t_end)
          drop[r] = 1;
      }
    }
  }

  DropoutResult out;
  std::size_t digs_left = 0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (drop[i]) {
      out.dropped_record_ids.push_back(i);
    } else {
      out.log.records.push_back(log.records[i]);
      if (log.records[i].role == Role::BucketDig) ++digs_left;
    }
  }
  if (out.dropped_record_ids.empty()) throw degenerate_split("dropout removed no dig records");
  if (digs_left == 0) throw degenerate_split("dropout removed every dig record");
  return out;
}

inline void save_simulated_csv_stream(const std::vector<SimulatedCluster>& sims,
                                      std::ostream& out) {
  out << "cluster_id,x,y\n";
  for (const auto& sc : sims)
    for (const auto& p : sc.points)
      out << sc.cluster_id << ',' << format_double(p[0]) << ',' << format_double(p[1]) << '\n';
}

inline void save_simulated_csv(const std::vector<SimulatedCluster>& sims,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  save_simulated_csv_stream(sims, out);
}

inline std::vector<SimulatedCluster> load_simulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw missing_file(path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty simulated CSV");
  std::vector<SimulatedCluster> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_csv_line(line);
    auto id = cols.size() == 3 ? parse_double(cols[0]) : std::nullopt;
    auto x = cols.size() == 3 ? parse_double(cols[1]) : std::nullopt;
    auto y = cols.size() == 3 ? parse_double(cols[2]) : std::nullopt;
    if (!id || !x || !y)
      throw data_error("simulated CSV line " + std::to_string(line_no) + ": bad row");
    const int cid = static_cast<int>(*id);
    if (out.empty() || out.back().cluster_id != cid) {
      SimulatedCluster sc;
      sc.cluster_id = cid;
      sc.source_moments.cluster_id = cid;
      out.push_back(sc);
    }
    out.back().points.push_back({*x, *y});
  }
  return out;
}

inline void save_ground_truth_csv(const std::vector<StationTruth>& truth,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << "station,mean_x,mean_y,std_x,std_y,exc_x,exc_y,t_begin,t_end,z\n";
  for (const auto& st : truth) {
    out << st.moments.cluster_id << ',' << format_double(st.moments.mean_x) << ','
        << format_double(st.moments.mean_y) << ',' << format_double(st.moments.std_x) << ','
        << format_double(st.moments.std_y) << ',' << format_double(st.moments.exc_x) << ','
        << format_double(st.moments.exc_y) << ',' << format_double(st.t_begin) << ','
        << format_double(st.t_end) << ',' << format_double(st.z) << '\n';
  }
}

}  // namespace diginfer
