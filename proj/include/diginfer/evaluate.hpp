#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "diginfer/dbscan.hpp"
#include "diginfer/errors.hpp"
#include "diginfer/moments.hpp"
#include "diginfer/simulate.hpp"

namespace diginfer {

struct ClusterError {
  int cluster_id = 0;
  double mean_err = 0.0;   // Euclidean distance between predicted and true means
  double std_err_x = 0.0;  // absolute per-axis std differences
  double std_err_y = 0.0;
  double gap_dist = 0.0;   // distance to the nearest training excavator feature
};

struct EvalSummary {
  double rmse_mean = 0.0;
  double mean_abs_std_err = 0.0;
  double recovery_rate = 0.0;
  double centroid_rmse = 0.0;
  double trend_rho = 0.0;
};

struct EvalReport {
  std::string scenario;
  std::vector<ClusterError> per_cluster;
  EvalSummary summary;
};

inline std::vector<ClusterError> moment_errors(const std::vector<ClusterMoments>& predicted,
                                               const std::vector<ClusterMoments>& truth) {
  if (predicted.size() != truth.size())
    throw id_mismatch("predicted and truth row counts differ");
  std::vector<ClusterError> out;
  out.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& p = predicted[i];
    auto it = std::find_if(truth.begin(), truth.end(), [&](const ClusterMoments& t) {
      return t.cluster_id == p.cluster_id;
    });
    if (it == truth.end())
      throw id_mismatch("no truth row for cluster " + std::to_string(p.cluster_id));
    ClusterError e;
    e.cluster_id = p.cluster_id;
    e.mean_err = std::hypot(p.mean_x - it->mean_x, p.mean_y - it->mean_y);
    e.std_err_x = std::abs(p.std_x - it->std_x);
    e.std_err_y = std::abs(p.std_y - it->std_y);
    out.push_back(e);
  }
  return out;
}

// Re-clusters the pooled simulated points in the plane and greedily matches
// recovered clusters to the dropped true clusters by ascending centroid
// distance, each side used at most once. A dropped cluster counts as
// recovered when its match lies within `threshold_eps_factor * eps`.
inline std::pair<double, double> cluster_recovery(
    const std::vector<SimulatedCluster>& simulated,
    const std::vector<std::array<double, 2>>& true_centroids, const DbscanParams& params,
    double threshold_eps_factor = 2.0) {
  if (simulated.empty()) throw data_error("no simulated clusters to evaluate");
  if (true_centroids.empty()) throw data_error("no dropped clusters to recover");

  std::vector<std::array<double, 2>> pool;
  for (const auto& sc : simulated)
    for (const auto& p : sc.points) pool.push_back(p);
  PointSet ps = PointSet::from_xy(pool);
  Clustering c = dbscan(ps, params);

  std::vector<std::array<double, 2>> recovered(static_cast<std::size_t>(c.n_clusters), {0, 0});
  std::vector<int> counts(static_cast<std::size_t>(c.n_clusters), 0);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (c.labels[i] == kNoiseLabel) continue;
    auto k = static_cast<std::size_t>(c.labels[i]);
    recovered[k][0] += ps.coords[i][0];
    recovered[k][1] += ps.coords[i][1];
    ++counts[k];
  }
  for (std::size_t k = 0; k < recovered.size(); ++k) {
    recovered[k][0] /= counts[k];
    recovered[k][1] /= counts[k];
  }

  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;  // (dist, true, recovered)
  for (std::size_t t = 0; t < true_centroids.size(); ++t)
    for (std::size_t r = 0; r < recovered.size(); ++r)
      pairs.emplace_back(std::hypot(true_centroids[t][0] - recovered[r][0],
                                    true_centroids[t][1] - recovered[r][1]),
                         t, r);
  std::sort(pairs.begin(), pairs.end());

  const double threshold = threshold_eps_factor * params.eps;
  std::vector<char> used_true(true_centroids.size(), 0), used_rec(recovered.size(), 0);
  std::size_t matched = 0;
  double sq_sum = 0.0;
  for (const auto& [dist, t, r] : pairs) {
    if (used_true[t] || used_rec[r]) continue;
    used_true[t] = used_rec[r] = 1;
    if (dist <= threshold) {
      ++matched;
      sq_sum += dist * dist;
    }
  }
  double rate = static_cast<double>(matched) / static_cast<double>(true_centroids.size());
  double rmse = matched > 0 ? std::sqrt(sq_sum / static_cast<double>(matched)) : 0.0;
  return {rate, rmse};
}

namespace detail {

inline std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Spearman rank correlation (midrank ties; all-tied input gives 0).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw data_error("spearman: size mismatch");
  const std::size_t n = a.size();
  auto ra = detail::midranks(a);
  auto rb = detail::midranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

inline double gap_trend(const std::vector<ClusterError>& errors) {
  if (errors.size() < 4) throw too_few_points("gap trend needs at least 4 test clusters");
  std::vector<double> gaps, errs;
  for (const auto& e : errors) {
    gaps.push_back(e.gap_dist);
    errs.push_back(e.mean_err);
  }
  return spearman(gaps, errs);
}

inline void to_json(nlohmann::json& j, const ClusterError& e) {
  j = {{"cluster_id", e.cluster_id}, {"mean_err", e.mean_err},   {"std_err_x", e.std_err_x},
       {"std_err_y", e.std_err_y},   {"gap_dist", e.gap_dist}};
}

inline void from_json(const nlohmann::json& j, ClusterError& e) {
  j.at("cluster_id").get_to(e.cluster_id);
  j.at("mean_err").get_to(e.mean_err);
  j.at("std_err_x").get_to(e.std_err_x);
  j.at("std_err_y").get_to(e.std_err_y);
  j.at("gap_dist").get_to(e.gap_dist);
}

inline void to_json(nlohmann::json& j, const EvalSummary& s) {
  j = {{"rmse_mean", s.rmse_mean},
       {"mean_abs_std_err", s.mean_abs_std_err},
       {"recovery_rate", s.recovery_rate},
       {"centroid_rmse", s.centroid_rmse},
       {"trend_rho", s.trend_rho}};
}

inline void from_json(const nlohmann::json& j, EvalSummary& s) {
  j.at("rmse_mean").get_to(s.rmse_mean);
  j.at("mean_abs_std_err").get_to(s.mean_abs_std_err);
  j.at("recovery_rate").get_to(s.recovery_rate);
  j.at("centroid_rmse").get_to(s.centroid_rmse);
  j.at("trend_rho").get_to(s.trend_rho);
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"scenario", r.scenario}, {"per_cluster", r.per_cluster}, {"summary", r.summary}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  j.at("scenario").get_to(r.scenario);
  j.at("per_cluster").get_to(r.per_cluster);
  j.at("summary").get_to(r.summary);
}

inline EvalReport build_report(std::string scenario, std::vector<ClusterError> per_cluster,
                               double recovery_rate, double centroid_rmse) {
  EvalReport rep;
  rep.scenario = std::move(scenario);
  rep.per_cluster = std::move(per_cluster);
  double sq = 0.0, abs_std = 0.0;
  for (const auto& e : rep.per_cluster) {
    sq += e.mean_err * e.mean_err;
    abs_std += 0.5 * (e.std_err_x + e.std_err_y);
  }
  const auto n = static_cast<double>(rep.per_cluster.size());
  rep.summary.rmse_mean = n > 0 ? std::sqrt(sq / n) : 0.0;
  rep.summary.mean_abs_std_err = n > 0 ? abs_std / n : 0.0;
  rep.summary.recovery_rate = recovery_rate;
  rep.summary.centroid_rmse = centroid_rmse;
  rep.summary.trend_rho =
      rep.per_cluster.size() >= 4 ? gap_trend(rep.per_cluster) : 0.0;
  return rep;
}

inline void save_report_json(const EvalReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  nlohmann::json j = rep;
  out << j.dump(2) << '\n';
}

inline void save_per_cluster_csv(const std::vector<ClusterError>& errors,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << "cluster_id,mean_err,std_err_x,std_err_y,gap_dist\n";
  for (const auto& e : errors) {
    out << e.cluster_id << ',' << format_double(e.mean_err) << ',' << format_double(e.std_err_x)
        << ',' << format_double(e.std_err_y) << ',' << format_double(e.gap_dist) << '\n';
  }
}

}  // namespace diginfer
