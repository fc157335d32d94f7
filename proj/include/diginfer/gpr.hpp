#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "diginfer/errors.hpp"
#include "diginfer/moments.hpp"
#include "diginfer/rng.hpp"

namespace diginfer {

inline constexpr double kJitterFloor = 1e-10;

struct KernelParams {
  double signal_var = 1.0;
  double length_scale = 1.0;
  double noise_var = 1e-2;
};

struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  double forward(double v) const { return (v - mean) / scale; }
  double inverse(double v) const { return mean + scale * v; }
};

// Isotropic squared-exponential kernel.
inline double kernel_eval(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                          const KernelParams& p) {
  const double d2 = (a - b).squaredNorm();
  return p.signal_var * std::exp(-d2 / (2.0 * p.length_scale * p.length_scale));
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;           // clamped at 0
  double variance_unclamped = 0.0; // standardized units, pre-clamp
};

namespace detail {

inline Standardizer fit_standardizer(const Eigen::VectorXd& v) {
  Standardizer s;
  s.mean = v.mean();
  const double n = static_cast<double>(v.size());
  double var = (v.array() - s.mean).square().sum() / std::max(1.0, n - 1.0);
  s.scale = std::sqrt(var);
  if (!(s.scale > 0.0)) s.scale = 1.0;
  return s;
}

inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelParams& p) {
  const auto n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = p.signal_var;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = kernel_eval(x.row(i).transpose(), x.row(j).transpose(), p);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Cholesky of K + (noise + jitter) I, escalating jitter 0 -> 1e-10 -> 1e-8 -> 1e-6.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& k, double noise_var,
                                              double* jitter_used = nullptr) {
  const auto n = k.rows();
  for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += noise_var + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
  }
  throw not_positive_definite("covariance not positive definite after jitter escalation (n=" +
                              std::to_string(n) + ")");
}

}  // namespace detail

// Exact-inference GP over standardized inputs and targets. The stored kernel
// parameters live in standardized space.
class GprModel {
 public:
  GprModel() = default;

  static GprModel fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                      const KernelParams& p) {
    if (inputs.rows() < 2) throw too_few_points("GP fit needs at least 2 points");
    if (inputs.rows() != targets.size()) throw data_error("inputs/targets size mismatch");

    GprModel m;
    m.params_ = p;
    if (m.params_.noise_var < kJitterFloor) m.params_.noise_var = kJitterFloor;
    for (int d = 0; d < 2; ++d) m.in_std_[static_cast<std::size_t>(d)] = detail::fit_standardizer(inputs.col(d));
    m.out_std_ = detail::fit_standardizer(targets);

    m.train_inputs_.resize(inputs.rows(), 2);
    for (int d = 0; d < 2; ++d)
      m.train_inputs_.col(d) =
          (inputs.col(d).array() - m.in_std_[static_cast<std::size_t>(d)].mean) / m.in_std_[static_cast<std::size_t>(d)].scale;
    Eigen::VectorXd y = (targets.array() - m.out_std_.mean) / m.out_std_.scale;

    Eigen::MatrixXd k = detail::kernel_matrix(m.train_inputs_, m.params_);
    double jitter = 0.0;
    auto llt = detail::robust_llt(k, m.params_.noise_var, &jitter);
    m.params_.noise_var += jitter;
    m.chol_ = llt.matrixL();
    m.weights_ = llt.solve(y);
    return m;
  }

  Prediction predict(const Eigen::Vector2d& query) const {
    Eigen::Vector2d q((query.x() - in_std_[0].mean) / in_std_[0].scale,
                      (query.y() - in_std_[1].mean) / in_std_[1].scale);
    const auto n = train_inputs_.rows();
    Eigen::VectorXd kstar(n);
    for (Eigen::Index i = 0; i < n; ++i)
      kstar(i) = kernel_eval(train_inputs_.row(i).transpose(), q, params_);

    Prediction out;
    const double mean_std = kstar.dot(weights_);
    Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(kstar);
    const double var_std = params_.signal_var + params_.noise_var - v.squaredNorm();
    out.variance_unclamped = var_std;
    out.mean = out_std_.inverse(mean_std);
    out.variance = std::max(0.0, var_std) * out_std_.scale * out_std_.scale;
    return out;
  }

  const KernelParams& params() const { return params_; }
  const Eigen::MatrixXd& train_inputs() const { return train_inputs_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Standardizer& input_standardizer(int dim) const { return in_std_[static_cast<std::size_t>(dim)]; }
  const Standardizer& target_standardizer() const { return out_std_; }

 private:
  KernelParams params_;
  Eigen::MatrixXd train_inputs_;  // standardized, n x 2
  Eigen::VectorXd weights_;       // (K + noise I)^-1 y, standardized
  Eigen::MatrixXd chol_;          // lower factor of K + noise I
  std::array<Standardizer, 2> in_std_;
  Standardizer out_std_;
};

struct LmlResult {
  double value = 0.0;
  // Partials w.r.t. log(signal_var), log(length_scale), log(noise_var).
  std::array<double, 3> grad{0.0, 0.0, 0.0};
};

// Log marginal likelihood of standardized data under the SE + white kernel,
// with analytic gradients in log-parameter space.
inline LmlResult log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                                         const Eigen::VectorXd& targets, const KernelParams& p) {
  if (inputs.rows() < 2) throw too_few_points("LML needs at least 2 points");
  const auto n = inputs.rows();

  Eigen::MatrixXd x(n, 2);
  for (int d = 0; d < 2; ++d) {
    auto s = detail::fit_standardizer(inputs.col(d));
    x.col(d) = (inputs.col(d).array() - s.mean) / s.scale;
  }
  auto sy = detail::fit_standardizer(targets);
  Eigen::VectorXd y = (targets.array() - sy.mean) / sy.scale;

  Eigen::MatrixXd kse = detail::kernel_matrix(x, p);
  auto llt = detail::robust_llt(kse, p.noise_var);
  Eigen::VectorXd alpha = llt.solve(y);

  LmlResult r;
  const Eigen::MatrixXd lower = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(lower(i, i));
  r.value = -0.5 * y.dot(alpha) - 0.5 * logdet -
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // dLML/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
  Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd outer = alpha * alpha.transpose() - kinv;

  // dK/dlog(sf2) = K_se; dK/dlog(l) = K_se .* d2/l2; dK/dlog(sn2) = sn2 I.
  Eigen::MatrixXd dkl(n, n);
  const double l2 = p.length_scale * p.length_scale;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      dkl(i, j) = kse(i, j) * d2 / l2;
    }
  r.grad[0] = 0.5 * (outer.array() * kse.array()).sum();
  r.grad[1] = 0.5 * (outer.array() * dkl.array()).sum();
  r.grad[2] = 0.5 * p.noise_var * outer.trace();
  return r;
}

// Multi-start gradient ascent on the LML in log-parameter space. Start boxes:
// length_scale in [0.1, 10] x median pairwise distance (standardized),
// signal_var in [0.1, 10], noise_var in [1e-6, 1e-1]. Deterministic per seed.
inline KernelParams optimize_hyperparams(const Eigen::MatrixXd& inputs,
                                         const Eigen::VectorXd& targets, int restarts,
                                         std::uint64_t seed) {
  if (inputs.rows() < 3) throw too_few_points("hyperparameter fit needs at least 3 points");
  if (restarts < 1) throw config_error("restarts must be >= 1");

  Eigen::MatrixXd x(inputs.rows(), 2);
  for (int d = 0; d < 2; ++d) {
    auto s = detail::fit_standardizer(inputs.col(d));
    x.col(d) = (inputs.col(d).array() - s.mean) / s.scale;
  }
  std::vector<double> dists;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < x.rows(); ++j)
      dists.push_back((x.row(i) - x.row(j)).norm());
  double med = median(dists);
  if (!(med > 0.0)) med = 1.0;

  auto eval = [&](const std::array<double, 3>& log_theta) -> LmlResult {
    KernelParams p{std::exp(log_theta[0]), std::exp(log_theta[1]), std::exp(log_theta[2])};
    return log_marginal_likelihood(inputs, targets, p);
  };

  Rng rng(seed);
  double best_value = -std::numeric_limits<double>::infinity();
  std::array<double, 3> best_theta{0.0, 0.0, std::log(1e-2)};
  bool any_success = false;

  for (int r = 0; r < restarts; ++r) {
    std::array<double, 3> theta{std::log(rng.log_uniform(0.1, 10.0)),
                                std::log(rng.log_uniform(0.1 * med, 10.0 * med)),
                                std::log(rng.log_uniform(1e-6, 1e-1))};
    try {
      LmlResult cur = eval(theta);
      double step = 0.1;
      for (int iter = 0; iter < 200; ++iter) {
        double gnorm = std::sqrt(cur.grad[0] * cur.grad[0] + cur.grad[1] * cur.grad[1] +
                                 cur.grad[2] * cur.grad[2]);
        if (gnorm < 1e-7) break;
        bool advanced = false;
        while (step > 1e-12) {
          std::array<double, 3> cand = theta;
          for (int d = 0; d < 3; ++d) cand[static_cast<std::size_t>(d)] += step * cur.grad[static_cast<std::size_t>(d)] / gnorm;
          // Keep noise above the jitter floor and everything in sane ranges.
          cand[0] = std::clamp(cand[0], std::log(1e-8), std::log(1e8));
          cand[1] = std::clamp(cand[1], std::log(1e-6 * med), std::log(1e6 * med));
          cand[2] = std::clamp(cand[2], std::log(kJitterFloor), std::log(10.0));
          try {
            LmlResult next = eval(cand);
            if (next.value > cur.value) {
              theta = cand;
              cur = next;
              step *= 1.5;
              advanced = true;
              break;
            }
          } catch (const not_positive_definite&) {
          }
          step *= 0.5;
        }
        if (!advanced) break;
      }
      if (cur.value > best_value) {
        best_value = cur.value;
        best_theta = theta;
      }
      any_success = true;
    } catch (const not_positive_definite&) {
      continue;
    }
  }
  if (!any_success) throw all_starts_failed("every hyperparameter start failed");
  return KernelParams{std::exp(best_theta[0]), std::exp(best_theta[1]), std::exp(best_theta[2])};
}

// Additive floor applied before the log transform of std targets.
inline constexpr double kStdFloor = 0.05;

struct MomentModels {
  GprModel mean_x;
  GprModel mean_y;
  GprModel log_std_x;
  GprModel log_std_y;

  struct MomentPrediction {
    double mean_x = 0.0, mean_y = 0.0;
    double std_x = 0.0, std_y = 0.0;
    double var_mean_x = 0.0, var_mean_y = 0.0;
  };

  MomentPrediction predict(double exc_x, double exc_y) const {
    Eigen::Vector2d q(exc_x, exc_y);
    MomentPrediction out;
    auto px = mean_x.predict(q);
    auto py = mean_y.predict(q);
    out.mean_x = px.mean;
    out.mean_y = py.mean;
    out.var_mean_x = px.variance;
    out.var_mean_y = py.variance;
    out.std_x = std::max(0.0, std::exp(log_std_x.predict(q).mean) - kStdFloor);
    out.std_y = std::max(0.0, std::exp(log_std_y.predict(q).mean) - kStdFloor);
    return out;
  }
};

// Fits the four per-target models on the Train split: mean_x, mean_y and the
// log-transformed stds, all against the (exc_x, exc_y) feature.
inline MomentModels fit_moment_models(const MomentDataset& ds, int restarts, std::uint64_t seed) {
  const auto train = ds.select(Split::Train);
  if (train.size() < 3) throw too_few_points("need at least 3 training clusters");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), 2);
  Eigen::VectorXd ymx(static_cast<Eigen::Index>(train.size()));
  Eigen::VectorXd ymy(static_cast<Eigen::Index>(train.size()));
  Eigen::VectorXd ysx(static_cast<Eigen::Index>(train.size()));
  Eigen::VectorXd ysy(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto idx = static_cast<Eigen::Index>(i);
    x(idx, 0) = train[i].exc_x;
    x(idx, 1) = train[i].exc_y;
    ymx(idx) = train[i].mean_x;
    ymy(idx) = train[i].mean_y;
    ysx(idx) = std::log(train[i].std_x + kStdFloor);
    ysy(idx) = std::log(train[i].std_y + kStdFloor);
  }

  auto fit_one = [&](const Eigen::VectorXd& y, const char* tag) {
    auto p = optimize_hyperparams(x, y, restarts, mix_seeds(seed, stage_seed(0, tag)));
    return GprModel::fit(x, y, p);
  };
  MomentModels m;
  m.mean_x = fit_one(ymx, "mean_x");
  m.mean_y = fit_one(ymy, "mean_y");
  m.log_std_x = fit_one(ysx, "log_std_x");
  m.log_std_y = fit_one(ysy, "log_std_y");
  return m;
}

inline nlohmann::json hyperparams_json(const MomentModels& m, const MomentDataset& ds) {
  const auto train = ds.select(Split::Train);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), 2);
  for (std::size_t i = 0; i < train.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = train[i].exc_x;
    x(static_cast<Eigen::Index>(i), 1) = train[i].exc_y;
  }
  auto entry = [&](const char* target, const GprModel& g, const Eigen::VectorXd& y) {
    auto lml = log_marginal_likelihood(x, y, g.params());
    return nlohmann::json{{"target", target},
                          {"signal_var", g.params().signal_var},
                          {"length_scale", g.params().length_scale},
                          {"noise_var", g.params().noise_var},
                          {"lml", lml.value}};
  };
  Eigen::VectorXd ymx(static_cast<Eigen::Index>(train.size())), ymy(ymx.size()), ysx(ymx.size()), ysy(ymx.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto idx = static_cast<Eigen::Index>(i);
    ymx(idx) = train[i].mean_x;
    ymy(idx) = train[i].mean_y;
    ysx(idx) = std::log(train[i].std_x + kStdFloor);
    ysy(idx) = std::log(train[i].std_y + kStdFloor);
  }
  return nlohmann::json::array({entry("mean_x", m.mean_x, ymx), entry("mean_y", m.mean_y, ymy),
                                entry("log_std_x", m.log_std_x, ysx),
                                entry("log_std_y", m.log_std_y, ysy)});
}

}  // namespace diginfer
