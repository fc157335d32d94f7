#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "diginfer/dbscan.hpp"
#include "diginfer/simulate.hpp"
#include "oracles.hpp"

using namespace diginfer;

namespace {

ClusterMoments moments_at(double mx, double my, double sx, double sy, int id = 0) {
  ClusterMoments m;
  m.cluster_id = id;
  m.mean_x = mx;
  m.mean_y = my;
  m.std_x = sx;
  m.std_y = sy;
  return m;
}

}  // namespace

TEST_CASE("zero spread collapses every draw onto the mean") {
  auto sc = simulate_cluster(moments_at(3.5, -2.0, 0, 0), 25, 42);
  REQUIRE(sc.points.size() == 25);
  for (const auto& p : sc.points) {
    CHECK(p[0] == 3.5);
    CHECK(p[1] == -2.0);
  }
}

TEST_CASE("large-sample moments converge to the target moments") {
  auto sc = simulate_cluster(moments_at(0, 0, 1.0, 2.0), 10000, 7);
  std::vector<double> xs, ys;
  for (const auto& p : sc.points) {
    xs.push_back(p[0]);
    ys.push_back(p[1]);
  }
  auto mx = oracle::two_pass(xs);
  auto my = oracle::two_pass(ys);
  CHECK(std::abs(mx.mean) <= 0.05);
  CHECK(std::abs(my.mean) <= 0.05);
  CHECK(std::abs(mx.sample_std - 1.0) <= 0.03);
  CHECK(std::abs(my.sample_std - 2.0) <= 0.06);
}

TEST_CASE("same seed gives bit-identical draws; cluster id keys the stream") {
  auto a = simulate_cluster(moments_at(1, 2, 3, 4, 5), 100, 99);
  auto b = simulate_cluster(moments_at(1, 2, 3, 4, 5), 100, 99);
  CHECK(a.points == b.points);
  auto c = simulate_cluster(moments_at(1, 2, 3, 4, 6), 100, 99);
  CHECK(a.points != c.points);
}

TEST_CASE("sampling error shrinks with n (fixed tolerances 15%, 5%, 3%)") {
  const double tol[3] = {0.15, 0.05, 0.03};
  const int sizes[3] = {100, 1000, 10000};
  double mean_err[3] = {0, 0, 0};
  for (int seed = 0; seed < 20; ++seed) {
    for (int k = 0; k < 3; ++k) {
      auto sc = simulate_cluster(moments_at(0, 0, 1.0, 1.0), sizes[k],
                                 2000 + static_cast<std::uint64_t>(seed));
      std::vector<double> xs;
      for (const auto& p : sc.points) xs.push_back(p[0]);
      auto m = oracle::two_pass(xs);
      mean_err[k] += std::abs(m.sample_std - 1.0) / 20.0;
    }
  }
  for (int k = 0; k < 3; ++k) CHECK(mean_err[k] <= tol[k]);
  CHECK(mean_err[1] <= mean_err[0]);
  CHECK(mean_err[2] <= mean_err[1]);
}

TEST_CASE("choose_sim_count takes the median training size") {
  auto make = [](std::initializer_list<int> sizes) {
    MomentDataset ds;
    int id = 0;
    for (int s : sizes) {
      ClusterMoments m;
      m.cluster_id = id++;
      m.n_points = s;
      ds.rows.push_back(m);
      ds.split.push_back(Split::Train);
    }
    return ds;
  };
  CHECK(choose_sim_count(make({4, 6, 8})) == 6);
  CHECK(choose_sim_count(make({12})) == 12);
  CHECK(choose_sim_count(make({3, 3, 9, 9})) == 6);
}

TEST_CASE("degenerate-spread bench: digs coincide and DBSCAN recovers every station") {
  SynthConfig cfg;
  cfg.n_stations = 8;
  cfg.digs_per_station = 6;
  cfg.dig_spread_x = 0;
  cfg.dig_spread_y = 0;
  cfg.gps_noise = 0;
  cfg.seed = 3;
  auto bench = generate_synthetic_bench(cfg);
  PointSet ps;
  ps.dim = 3;
  for (const auto& r : select_role(bench.log, Role::BucketDig)) ps.coords.push_back({r.x, r.y, r.z});
  auto c = dbscan(ps, {cfg.station_spacing / 4.0, 2});
  CHECK(c.n_clusters == cfg.n_stations);
  for (int l : c.labels) CHECK(l != kNoiseLabel);
  // All digs of a station coincide with its center.
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& st = bench.truth[static_cast<std::size_t>(c.labels[i])].moments;
    CHECK(ps.coords[i][0] == doctest::Approx(st.mean_x).epsilon(1e-12));
    CHECK(ps.coords[i][1] == doctest::Approx(st.mean_y).epsilon(1e-12));
  }
}

TEST_CASE("bench record counts follow the config") {
  SynthConfig cfg;
  cfg.n_stations = 12;
  cfg.digs_per_station = 10;
  cfg.seed = 1;
  auto bench = generate_synthetic_bench(cfg);
  CHECK(select_role(bench.log, Role::BucketDig).size() == 120);
  CHECK(select_role(bench.log, Role::BucketDump).size() == 120);
  CHECK(bench.truth.size() == 12);
}

TEST_CASE("full-data pipeline moments track ground truth within statistical tolerance") {
  SynthConfig cfg;
  cfg.seed = 11;
  auto bench = generate_synthetic_bench(cfg);
  PointSet ps;
  ps.dim = 3;
  for (const auto& r : select_role(bench.log, Role::BucketDig)) ps.coords.push_back({r.x, r.y, r.z});
  auto c = dbscan(ps, {2.5, 5});
  REQUIRE(c.n_clusters == cfg.n_stations);
  auto rows = compute_associated_moments(ps, c, bench.log);
  const double tol = 3.0 * cfg.dig_spread_x / std::sqrt(static_cast<double>(cfg.digs_per_station));
  for (const auto& m : rows) {
    // Match to the nearest station truth.
    const StationTruth* best = nullptr;
    double best_d = 1e30;
    for (const auto& st : bench.truth) {
      double d = std::hypot(m.mean_x - st.moments.mean_x, m.mean_y - st.moments.mean_y);
      if (d < best_d) {
        best_d = d;
        best = &st;
      }
    }
    CHECK(std::abs(m.mean_x - best->moments.mean_x) <= tol);
    CHECK(std::abs(m.mean_y - best->moments.mean_y) <= tol);
  }
}

TEST_CASE("seed determinism: identical config gives byte-identical telemetry") {
  SynthConfig cfg;
  cfg.seed = 77;
  auto a = generate_synthetic_bench(cfg);
  auto b = generate_synthetic_bench(cfg);
  std::ostringstream sa, sb;
  save_csv_stream(a.log, sa);
  save_csv_stream(b.log, sb);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("window dropout removes exactly the in-window digs") {
  SynthConfig cfg;
  cfg.seed = 5;
  auto bench = generate_synthetic_bench(cfg);
  const double t0 = bench.truth[4].t_begin;
  const double t1 = bench.truth[7].t_end;
  auto res = apply_dropout(bench.log, DropWindow{t0, t1});
  std::set<std::size_t> dropped(res.dropped_record_ids.begin(), res.dropped_record_ids.end());
  for (std::size_t i = 0; i < bench.log.records.size(); ++i) {
    const auto& r = bench.log.records[i];
    bool should_drop =
        r.role == Role::BucketDig && r.timestamp >= t0 && r.timestamp <= t1;
    CHECK(dropped.count(i) == (should_drop ? 1u : 0u));
  }
  CHECK(res.log.records.size() + res.dropped_record_ids.size() == bench.log.records.size());
  CHECK(select_role(res.log, Role::Excavator).size() ==
        select_role(bench.log, Role::Excavator).size());
}

TEST_CASE("random-cluster dropout removes whole stations and keeps excavator fixes") {
  SynthConfig cfg;
  cfg.seed = 6;
  auto bench = generate_synthetic_bench(cfg);  // 12 stations
  auto res = apply_dropout(bench.log, DropRandomClusters{0.25, 9}, bench.truth);
  CHECK(res.dropped_record_ids.size() == 3u * static_cast<std::size_t>(cfg.digs_per_station));
  CHECK(select_role(res.log, Role::Excavator).size() ==
        select_role(bench.log, Role::Excavator).size());
  CHECK(select_role(res.log, Role::BucketDig).size() == 90);
}

TEST_CASE("dropout that removes nothing or everything is rejected") {
  SynthConfig cfg;
  cfg.seed = 8;
  auto bench = generate_synthetic_bench(cfg);
  const double t_end = bench.truth.back().t_end;
  CHECK_THROWS_AS(apply_dropout(bench.log, DropWindow{t_end + 1000, t_end + 2000}),
                  degenerate_split);
  CHECK_THROWS_AS(apply_dropout(bench.log, DropWindow{-1000, t_end + 1000}), degenerate_split);
}

TEST_CASE("simulated CSV round-trips") {
  std::vector<SimulatedCluster> sims;
  sims.push_back(simulate_cluster(moments_at(0, 0, 1, 1, 2), 5, 1));
  sims.push_back(simulate_cluster(moments_at(10, 10, 1, 1, 7), 5, 1));
  save_simulated_csv(sims, "test_simulated_roundtrip.csv");
  auto back = load_simulated_csv("test_simulated_roundtrip.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].cluster_id == 2);
  CHECK(back[1].cluster_id == 7);
  CHECK(back[0].points == sims[0].points);
  CHECK(back[1].points == sims[1].points);
}
