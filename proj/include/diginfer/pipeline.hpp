#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "diginfer/dbscan.hpp"
#include "diginfer/errors.hpp"
#include "diginfer/evaluate.hpp"
#include "diginfer/gpr.hpp"
#include "diginfer/moments.hpp"
#include "diginfer/simulate.hpp"
#include "diginfer/svg_plot.hpp"
#include "diginfer/telemetry.hpp"

namespace diginfer {

struct ScenarioRandom {
  double fraction = 0.25;
};

struct ScenarioWindow {
  double t0 = 0.0;
  double t1 = 0.0;
};

using Scenario = std::variant<ScenarioRandom, ScenarioWindow>;

inline std::string scenario_name(const Scenario& s) {
  if (const auto* r = std::get_if<ScenarioRandom>(&s))
    return "random:" + format_double(r->fraction);
  const auto& w = std::get<ScenarioWindow>(s);
  return "window:" + format_double(w.t0) + ":" + format_double(w.t1);
}

struct RunConfig {
  bool synthetic = true;
  std::string input_csv;  // used when synthetic == false
  SynthConfig synth;
  std::string out_dir = "out";
  DbscanParams dbscan_params;
  Scenario scenario = ScenarioRandom{};
  int restarts = 8;
  int sim_count_override = 0;  // 0 means median training-cluster size
  std::uint64_t master_seed = 0;
  bool plots = true;
};

struct PipelineResult {
  TelemetryLog log;
  std::vector<StationTruth> truth;  // synthetic runs only
  PointSet dig_points;
  Clustering clustering;
  MomentDataset moments;
  std::vector<ClusterMoments> predicted;  // Test rows, inferred moments
  std::vector<SimulatedCluster> simulated;
  EvalReport report;
};

namespace detail {

// Rethrows stage failures with the stage name attached, preserving the
// error category (and hence the exit code).
template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const config_error& e) {
    throw config_error(std::string("stage ") + stage + ": " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(std::string("stage ") + stage + ": " + e.what());
  } catch (const data_error& e) {
    throw data_error(std::string("stage ") + stage + ": " + e.what());
  }
}

inline PointSet dig_point_set(const TelemetryLog& log) {
  PointSet ps;
  ps.dim = 3;
  for (const auto& r : select_role(log, Role::BucketDig)) ps.coords.push_back({r.x, r.y, r.z});
  return ps;
}

}  // namespace detail

// Runs generate/load -> cluster -> moments/split -> fit -> predict ->
// simulate -> evaluate, serializing every intermediate into cfg.out_dir.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto path = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

  PipelineResult res;

  detail::run_stage("generate", [&] {
    if (cfg.synthetic) {
      auto bench = generate_synthetic_bench(cfg.synth);
      res.log = std::move(bench.log);
      res.truth = std::move(bench.truth);
      save_ground_truth_csv(res.truth, path("ground_truth.csv"));
    } else {
      res.log = load_csv(cfg.input_csv);
      if (!res.log.rejects.empty()) {
        std::ofstream out(path("rejects.json"));
        out << rejection_report(res.log).dump(2) << '\n';
      }
    }
    if (!res.log.has_role(Role::BucketDig) || !res.log.has_role(Role::Excavator))
      throw data_error("log needs at least one dig and one excavator record");
    save_csv(res.log, path("telemetry.csv"));
    return 0;
  });

  detail::run_stage("cluster", [&] {
    res.dig_points = detail::dig_point_set(res.log);
    res.clustering = dbscan(res.dig_points, cfg.dbscan_params);
    save_clusters_csv(res.dig_points, res.clustering, path("clusters.csv"));
    if (res.clustering.n_clusters == 0) throw data_error("no clusters found; adjust eps/min_pts");
    return 0;
  });

  detail::run_stage("moments", [&] {
    res.moments.rows = compute_associated_moments(res.dig_points, res.clustering, res.log);
    res.moments.split.assign(res.moments.rows.size(), Split::Train);
    return 0;
  });

  detail::run_stage("split", [&] {
    if (const auto* r = std::get_if<ScenarioRandom>(&cfg.scenario))
      res.moments = split_random(res.moments, r->fraction, stage_seed(cfg.master_seed, "split"));
    else {
      const auto& w = std::get<ScenarioWindow>(cfg.scenario);
      res.moments = split_window(res.moments, w.t0, w.t1);
    }
    save_moments_csv(res.moments, path("moments.csv"));
    return 0;
  });

  MomentModels models;
  detail::run_stage("fit", [&] {
    models = fit_moment_models(res.moments, cfg.restarts, stage_seed(cfg.master_seed, "gpr"));
    std::ofstream out(path("hyperparams.json"));
    out << hyperparams_json(models, res.moments).dump(2) << '\n';
    return 0;
  });

  detail::run_stage("simulate", [&] {
    const int n_sim =
        cfg.sim_count_override > 0 ? cfg.sim_count_override : choose_sim_count(res.moments);
    const auto sim_seed = stage_seed(cfg.master_seed, "sim");
    for (std::size_t i = 0; i < res.moments.rows.size(); ++i) {
      if (res.moments.split[i] != Split::Test) continue;
      const auto& row = res.moments.rows[i];
      auto p = models.predict(row.exc_x, row.exc_y);
      ClusterMoments inferred = row;
      inferred.mean_x = p.mean_x;
      inferred.mean_y = p.mean_y;
      inferred.std_x = p.std_x;
      inferred.std_y = p.std_y;
      res.predicted.push_back(inferred);
      res.simulated.push_back(simulate_cluster(inferred, n_sim, sim_seed));
    }
    MomentDataset pred_ds;
    pred_ds.rows = res.predicted;
    pred_ds.split.assign(res.predicted.size(), Split::Test);
    save_moments_csv(pred_ds, path("predicted.csv"));
    save_simulated_csv(res.simulated, path("simulated.csv"));
    return 0;
  });

  detail::run_stage("evaluate", [&] {
    const auto test_rows = res.moments.select(Split::Test);
    const auto train_rows = res.moments.select(Split::Train);
    auto errors = moment_errors(res.predicted, test_rows);
    for (auto& e : errors) {
      const ClusterMoments* row = nullptr;
      for (const auto& t : test_rows)
        if (t.cluster_id == e.cluster_id) row = &t;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& t : train_rows)
        best = std::min(best, std::hypot(row->exc_x - t.exc_x, row->exc_y - t.exc_y));
      e.gap_dist = best;
    }
    std::vector<std::array<double, 2>> dropped_centroids;
    for (const auto& t : test_rows) dropped_centroids.push_back({t.mean_x, t.mean_y});
    auto [rate, rmse] = cluster_recovery(res.simulated, dropped_centroids, cfg.dbscan_params);
    res.report = build_report(scenario_name(cfg.scenario), std::move(errors), rate, rmse);
    save_report_json(res.report, path("report.json"));
    save_per_cluster_csv(res.report.per_cluster, path("per_cluster.csv"));
    return 0;
  });

  if (cfg.plots) {
    try {
      fs::create_directories(fs::path(cfg.out_dir) / "plots");
      auto plot_path = [&](const char* name) {
        return (fs::path(cfg.out_dir) / "plots" / name).string();
      };
      plot_telemetry(res.log, plot_path("telemetry.svg"));
      plot_clusters(res.dig_points, res.clustering, plot_path("clusters.svg"));
      plot_moment_errors(res.moments.select(Split::Test), res.predicted,
                         plot_path("moments.svg"));
      plot_simulated_overlay(res.simulated, res.dig_points, res.clustering,
                             plot_path("simulated.svg"));
    } catch (const std::exception& e) {
      std::cerr << "warning: plot generation failed: " << e.what() << '\n';
    }
  }
  return res;
}

}  // namespace diginfer
