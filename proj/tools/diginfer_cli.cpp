// Command-line front end for the dig-location inference pipeline.
//
// Subcommands:
//   generate  - write a seeded synthetic bench (telemetry + ground truth)
//   cluster   - DBSCAN a telemetry CSV into clusters and moments
//   infer     - fit GPs on the training split and simulate missing clusters
//   evaluate  - score predictions against truth moments
//   pipeline  - all of the above in one run

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "diginfer/diginfer.hpp"

namespace fs = std::filesystem;
using namespace diginfer;

namespace {

Scenario parse_scenario(const std::string& spec) {
  if (spec.rfind("random:", 0) == 0) {
    auto f = parse_double(std::string_view(spec).substr(7));
    if (!f) throw config_error("bad scenario spec: " + spec);
    return ScenarioRandom{*f};
  }
  if (spec.rfind("window:", 0) == 0) {
    auto rest = spec.substr(7);
    auto colon = rest.find(':');
    if (colon == std::string::npos) throw config_error("bad scenario spec: " + spec);
    auto t0 = parse_double(std::string_view(rest).substr(0, colon));
    auto t1 = parse_double(std::string_view(rest).substr(colon + 1));
    if (!t0 || !t1) throw config_error("bad scenario spec: " + spec);
    return ScenarioWindow{*t0, *t1};
  }
  throw config_error("scenario must be random:<f> or window:<t0>:<t1>, got: " + spec);
}

PathKind parse_path_kind(const std::string& s) {
  if (s == "line") return PathKind::Line;
  if (s == "arc") return PathKind::Arc;
  if (s == "scurve") return PathKind::SCurve;
  throw config_error("path must be line|arc|scurve, got: " + s);
}

void add_synth_flags(CLI::App* app, SynthConfig& synth, std::string& path_kind) {
  app->add_option("--stations", synth.n_stations, "number of dig stations");
  app->add_option("--digs-per-station", synth.digs_per_station, "dig points per station");
  app->add_option("--station-spacing", synth.station_spacing, "spacing along the path [m]");
  app->add_option("--path", path_kind, "excavator path shape: line|arc|scurve");
  app->add_option("--spread-x", synth.dig_spread_x, "dig spread std in x [m]");
  app->add_option("--spread-y", synth.dig_spread_y, "dig spread std in y [m]");
  app->add_option("--gps-noise", synth.gps_noise, "excavator GPS noise std [m]");
  app->add_option("--fix-interval", synth.fix_interval, "seconds between excavator fixes");
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Reconstructs missing excavator bucket dig locations from GPS telemetry"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string scenario_spec = "random:0.25";
  std::string path_kind = "scurve";
  bool no_plots = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", cfg.out_dir, "artifact output directory");
    sub->add_option("--seed", cfg.master_seed, "master seed");
  };
  auto add_dbscan = [&](CLI::App* sub) {
    sub->add_option("--eps", cfg.dbscan_params.eps, "DBSCAN neighborhood radius [m]");
    sub->add_option("--min-pts", cfg.dbscan_params.min_pts, "DBSCAN density threshold");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic bench");
  add_common(gen);
  add_synth_flags(gen, cfg.synth, path_kind);

  std::string input_csv;
  auto* cluster = app.add_subcommand("cluster", "cluster a telemetry CSV");
  add_common(cluster);
  add_dbscan(cluster);
  cluster->add_option("--input", input_csv, "telemetry CSV")->required();

  std::string moments_path;
  auto* infer = app.add_subcommand("infer", "fit GPs and simulate missing clusters");
  add_common(infer);
  infer->add_option("--moments", moments_path, "moments CSV")->required();
  infer->add_option("--scenario", scenario_spec, "random:<f> or window:<t0>:<t1>");
  infer->add_option("--restarts", cfg.restarts, "hyperparameter restarts");
  infer->add_option("--sim-count", cfg.sim_count_override, "points per simulated cluster");
  bool use_file_split = false;
  infer->add_flag("--use-file-split", use_file_split, "keep the split column from the CSV");

  std::string predicted_path, truth_path, simulated_path;
  auto* eval = app.add_subcommand("evaluate", "score predictions against truth");
  add_common(eval);
  add_dbscan(eval);
  eval->add_option("--predicted", predicted_path, "predicted moments CSV")->required();
  eval->add_option("--truth", truth_path, "truth moments CSV with split column")->required();
  eval->add_option("--simulated", simulated_path, "simulated points CSV")->required();

  auto* pipe = app.add_subcommand("pipeline", "run every stage");
  add_common(pipe);
  add_dbscan(pipe);
  bool synthetic = false;
  pipe->add_flag("--synthetic", synthetic, "generate a synthetic bench instead of reading a CSV");
  pipe->add_option("--input", input_csv, "telemetry CSV (real-data mode)");
  pipe->add_option("--scenario", scenario_spec, "random:<f> or window:<t0>:<t1>");
  pipe->add_option("--restarts", cfg.restarts, "hyperparameter restarts");
  pipe->add_option("--sim-count", cfg.sim_count_override, "points per simulated cluster");
  pipe->add_flag("--no-plots", no_plots, "skip SVG emission");
  add_synth_flags(pipe, cfg.synth, path_kind);

  CLI11_PARSE(app, argc, argv);

  fs::create_directories(cfg.out_dir);
  auto out = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

  if (gen->parsed()) {
    cfg.synth.path_kind = parse_path_kind(path_kind);
    cfg.synth.seed = stage_seed(cfg.master_seed, "bench");
    auto bench = generate_synthetic_bench(cfg.synth);
    save_csv(bench.log, out("telemetry.csv"));
    save_ground_truth_csv(bench.truth, out("ground_truth.csv"));
    std::cout << "wrote " << out("telemetry.csv") << " (" << bench.log.records.size()
              << " records)\n";
    return 0;
  }

  if (cluster->parsed()) {
    auto log = load_csv(input_csv);
    if (!log.rejects.empty()) {
      std::ofstream rej(out("rejects.json"));
      rej << rejection_report(log).dump(2) << '\n';
      std::cout << "rejected " << log.rejects.size() << " rows, see rejects.json\n";
    }
    PointSet ps;
    ps.dim = 3;
    for (const auto& r : select_role(log, Role::BucketDig)) ps.coords.push_back({r.x, r.y, r.z});
    auto c = dbscan(ps, cfg.dbscan_params);
    save_clusters_csv(ps, c, out("clusters.csv"));
    if (c.n_clusters == 0) throw data_error("no clusters found; adjust --eps/--min-pts");
    MomentDataset ds;
    ds.rows = compute_associated_moments(ps, c, log);
    ds.split.assign(ds.rows.size(), Split::Train);
    save_moments_csv(ds, out("moments.csv"));
    std::cout << "found " << c.n_clusters << " clusters\n";
    return 0;
  }

  if (infer->parsed()) {
    auto ds = load_moments_csv(moments_path);
    if (!use_file_split) {
      auto scenario = parse_scenario(scenario_spec);
      if (const auto* r = std::get_if<ScenarioRandom>(&scenario))
        ds = split_random(ds, r->fraction, stage_seed(cfg.master_seed, "split"));
      else {
        const auto& w = std::get<ScenarioWindow>(scenario);
        ds = split_window(ds, w.t0, w.t1);
      }
    }
    save_moments_csv(ds, out("moments.csv"));
    auto models = fit_moment_models(ds, cfg.restarts, stage_seed(cfg.master_seed, "gpr"));
    {
      std::ofstream hp(out("hyperparams.json"));
      hp << hyperparams_json(models, ds).dump(2) << '\n';
    }
    const int n_sim = cfg.sim_count_override > 0 ? cfg.sim_count_override : choose_sim_count(ds);
    const auto sim_seed = stage_seed(cfg.master_seed, "sim");
    MomentDataset pred;
    std::vector<SimulatedCluster> sims;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
      if (ds.split[i] != Split::Test) continue;
      const auto& row = ds.rows[i];
      auto p = models.predict(row.exc_x, row.exc_y);
      ClusterMoments inferred = row;
      inferred.mean_x = p.mean_x;
      inferred.mean_y = p.mean_y;
      inferred.std_x = p.std_x;
      inferred.std_y = p.std_y;
      pred.rows.push_back(inferred);
      pred.split.push_back(Split::Test);
      sims.push_back(simulate_cluster(inferred, n_sim, sim_seed));
    }
    save_moments_csv(pred, out("predicted.csv"));
    save_simulated_csv(sims, out("simulated.csv"));
    std::cout << "inferred " << pred.rows.size() << " clusters, " << n_sim
              << " simulated points each\n";
    return 0;
  }

  if (eval->parsed()) {
    auto pred = load_moments_csv(predicted_path);
    auto truth = load_moments_csv(truth_path);
    auto sims = load_simulated_csv(simulated_path);
    auto test_rows = truth.select(Split::Test);
    auto train_rows = truth.select(Split::Train);
    auto errors = moment_errors(pred.rows, test_rows);
    for (auto& e : errors) {
      const ClusterMoments* row = nullptr;
      for (const auto& t : test_rows)
        if (t.cluster_id == e.cluster_id) row = &t;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& t : train_rows)
        best = std::min(best, std::hypot(row->exc_x - t.exc_x, row->exc_y - t.exc_y));
      e.gap_dist = best;
    }
    std::vector<std::array<double, 2>> centroids;
    for (const auto& t : test_rows) centroids.push_back({t.mean_x, t.mean_y});
    auto [rate, rmse] = cluster_recovery(sims, centroids, cfg.dbscan_params);
    auto report = build_report("evaluate", std::move(errors), rate, rmse);
    save_report_json(report, out("report.json"));
    save_per_cluster_csv(report.per_cluster, out("per_cluster.csv"));
    std::cout << "rmse_mean=" << report.summary.rmse_mean
              << " recovery_rate=" << report.summary.recovery_rate << '\n';
    return 0;
  }

  // pipeline
  cfg.synthetic = synthetic;
  cfg.input_csv = input_csv;
  if (!cfg.synthetic && cfg.input_csv.empty())
    throw config_error("pipeline needs --synthetic or --input <csv>");
  cfg.synth.path_kind = parse_path_kind(path_kind);
  cfg.synth.seed = stage_seed(cfg.master_seed, "bench");
  cfg.scenario = parse_scenario(scenario_spec);
  cfg.plots = !no_plots;
  auto res = run_pipeline(cfg);
  std::cout << "scenario=" << res.report.scenario << " clusters=" << res.clustering.n_clusters
            << " rmse_mean=" << res.report.summary.rmse_mean
            << " recovery_rate=" << res.report.summary.recovery_rate
            << " trend_rho=" << res.report.summary.trend_rho << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
