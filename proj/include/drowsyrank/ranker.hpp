#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "drowsyrank/features.hpp"
#include "drowsyrank/rng.hpp"
#include "drowsyrank/text.hpp"

namespace drowsyrank::ranker {

using features::FeatureVector;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct EqualTimestamps : Error {
  using Error::Error;
};
struct NoValidPair : Error {
  using Error::Error;
};
struct ModelFormatError : Error {
  using Error::Error;
};

// Linear drowsiness scorer, y = theta' x. No intercept: a bias cancels in
// score differences and would only inflate the regularizer.
struct LinearModel {
  std::vector<double> theta;
  double lambda = 0.0;
  std::vector<std::string> feature_names;

  std::size_t dimension() const { return theta.size(); }
};

enum class OptimizerKind { Sgd, Adam };

struct SgdParams {
  double learning_rate = 0.05;
  double decay = 0.0;  // eta_k = learning_rate / (1 + decay*k)
};

struct AdamParams {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  long iterations = 200000;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  SgdParams sgd;
  AdamParams adam;
  double min_time_gap = 0.0;       // seconds between paired samples
  long loss_report_every = 10000;  // training-log cadence
  long loss_subsample = 2000;      // pairs per logged loss estimate

  void check() const {
    if (iterations < 1) throw Error("iterations must be >= 1");
    if (min_time_gap < 0.0) throw Error("min_time_gap must be >= 0");
    if (optimizer == OptimizerKind::Sgd) {
      if (!(sgd.learning_rate > 0.0)) throw Error("learning_rate must be > 0");
    } else {
      if (!(adam.learning_rate > 0.0)) throw Error("learning_rate must be > 0");
      if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) ||
          !(adam.beta2 > 0.0 && adam.beta2 < 1.0))
        throw Error("Adam betas must be in (0,1)");
    }
  }
};

struct PairDraw {
  std::size_t trip = 0;
  std::size_t t_idx = 0;
  std::size_t u_idx = 0;
};

struct OptimizerState {
  long step = 0;
  std::vector<double> m;  // Adam first moment
  std::vector<double> v;  // Adam second moment
};

struct TrainLogEntry {
  long step;
  double loss;
};

struct TrainResult {
  LinearModel model;
  std::vector<TrainLogEntry> log;
};

using FeaturizedTrips = std::vector<std::vector<FeatureVector>>;

inline double score(const LinearModel& model, const FeatureVector& x) {
  if (x.values.size() != model.theta.size())
    throw DimensionMismatch("score: feature dimension " +
                            std::to_string(x.values.size()) + " != model D " +
                            std::to_string(model.theta.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < model.theta.size(); ++i)
    s += model.theta[i] * x.values[i];
  return s;
}

// max(0, 1 - sgn(t - u) * (f(x_t) - f(x_u)))
inline double pair_loss(const LinearModel& model, const FeatureVector& x_t,
                        double t, const FeatureVector& x_u, double u) {
  if (t == u) throw EqualTimestamps("pair_loss: t == u");
  const double sgn = t > u ? 1.0 : -1.0;
  return std::max(0.0, 1.0 - sgn * (score(model, x_t) - score(model, x_u)));
}

// Hinge subgradient plus the L2 regularizer 2*lambda*theta. At the kink the
// hinge part is taken as 0.
inline std::vector<double> pair_subgradient(const LinearModel& model,
                                            const FeatureVector& x_t, double t,
                                            const FeatureVector& x_u, double u) {
  if (t == u) throw EqualTimestamps("pair_subgradient: t == u");
  const double sgn = t > u ? 1.0 : -1.0;
  const double margin = sgn * (score(model, x_t) - score(model, x_u));
  std::vector<double> g(model.theta.size(), 0.0);
  if (1.0 - margin > 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = -sgn * (x_t.values[i] - x_u.values[i]);
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] += 2.0 * model.lambda * model.theta[i];
  return g;
}

namespace detail {

inline bool trip_admits_pair(const std::vector<FeatureVector>& trip,
                             double min_time_gap) {
  if (trip.size() < 2) return false;
  // Timestamps are strictly increasing, so the widest gap is last - first.
  return trip.back().t - trip.front().t >= min_time_gap;
}

}  // namespace detail

// Trip index uniform over drowsy trips; (t, u) uniform over valid pairs of
// that trip. Bounded in-trip retries for the gap constraint, then the trip
// itself is resampled.
inline PairDraw sample_pair(Rng& rng, const FeaturizedTrips& trips,
                            double min_time_gap) {
  bool any = false;
  for (const auto& trip : trips)
    if (detail::trip_admits_pair(trip, min_time_gap)) {
      any = true;
      break;
    }
  if (!any)
    throw NoValidPair("sample_pair: no trip admits a pair with min_time_gap " +
                      format_double(min_time_gap));
  for (;;) {
    const std::size_t i = rng.uniform_index(trips.size());
    const auto& trip = trips[i];
    if (trip.size() < 2) continue;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const std::size_t a = rng.uniform_index(trip.size());
      const std::size_t b = rng.uniform_index(trip.size());
      if (a == b) continue;
      if (std::abs(trip[a].t - trip[b].t) < min_time_gap) continue;
      return PairDraw{i, a, b};
    }
  }
}

// Exact mode: mean over trips of the mean of pair_loss over all unordered
// within-trip pairs. Subsample mode: Monte Carlo with `subsample` draws.
inline double empirical_loss(const LinearModel& model, const FeaturizedTrips& trips,
                             std::optional<long> subsample = std::nullopt,
                             Rng* rng = nullptr) {
  bool any = false;
  for (const auto& trip : trips)
    if (trip.size() >= 2) any = true;
  if (!any) throw NoValidPair("empirical_loss: no trip has >= 2 vectors");

  if (subsample) {
    if (rng == nullptr) throw Error("empirical_loss: subsample mode needs an rng");
    double sum = 0.0;
    for (long k = 0; k < *subsample; ++k) {
      const PairDraw d = sample_pair(*rng, trips, 0.0);
      const auto& trip = trips[d.trip];
      sum += pair_loss(model, trip[d.t_idx], trip[d.t_idx].t, trip[d.u_idx],
                       trip[d.u_idx].t);
    }
    return sum / static_cast<double>(*subsample);
  }

  double total = 0.0;
  std::size_t n_trips = 0;
  for (const auto& trip : trips) {
    if (trip.size() < 2) continue;
    double trip_sum = 0.0;
    for (std::size_t a = 0; a < trip.size(); ++a)
      for (std::size_t b = a + 1; b < trip.size(); ++b)
        trip_sum += pair_loss(model, trip[a], trip[a].t, trip[b], trip[b].t);
    const double n_pairs =
        0.5 * static_cast<double>(trip.size()) * static_cast<double>(trip.size() - 1);
    total += trip_sum / n_pairs;
    ++n_trips;
  }
  return total / static_cast<double>(n_trips);
}

inline void optimizer_step(OptimizerState& state, std::vector<double>& theta,
                           const std::vector<double>& gradient,
                           const TrainConfig& config) {
  if (theta.size() != gradient.size())
    throw DimensionMismatch("optimizer_step: gradient dimension mismatch");
  if (config.optimizer == OptimizerKind::Sgd) {
    const double eta = config.sgd.learning_rate /
                       (1.0 + config.sgd.decay * static_cast<double>(state.step));
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * gradient[i];
    ++state.step;
    return;
  }
  if (state.m.size() != theta.size()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  const AdamParams& p = config.adam;
  ++state.step;
  const double k = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(p.beta1, k);
  const double bc2 = 1.0 - std::pow(p.beta2, k);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * gradient[i];
    state.v[i] = p.beta2 * state.v[i] + (1.0 - p.beta2) * gradient[i] * gradient[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    theta[i] -= p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon);
  }
}

inline TrainResult train(const FeaturizedTrips& drowsy_trips,
                         const TrainConfig& config, double lambda,
                         std::vector<std::string> feature_names = {}) {
  config.check();
  if (lambda < 0.0) throw Error("train: lambda must be >= 0");
  std::size_t dim = 0;
  for (const auto& trip : drowsy_trips)
    if (!trip.empty()) dim = trip.front().values.size();
  if (dim == 0) throw NoValidPair("train: no featurized drowsy trips");

  TrainResult result;
  result.model.theta.assign(dim, 0.0);
  result.model.lambda = lambda;
  result.model.feature_names = std::move(feature_names);

  Rng rng(config.seed);
  Rng loss_rng = rng.child(0x10557106);  // separate stream for loss reporting
  OptimizerState state;

  auto log_loss = [&](long step) {
    Rng probe = loss_rng.child(static_cast<std::uint64_t>(step));
    result.log.push_back(
        {step, empirical_loss(result.model, drowsy_trips, config.loss_subsample,
                              &probe)});
  };
  if (config.loss_report_every > 0) log_loss(0);

  for (long step = 1; step <= config.iterations; ++step) {
    const PairDraw d = sample_pair(rng, drowsy_trips, config.min_time_gap);
    const auto& trip = drowsy_trips[d.trip];
    const auto g = pair_subgradient(result.model, trip[d.t_idx], trip[d.t_idx].t,
                                    trip[d.u_idx], trip[d.u_idx].t);
    optimizer_step(state, result.model.theta, g, config);
    if (config.loss_report_every > 0 &&
        (step % config.loss_report_every == 0 || step == config.iterations) &&
        (result.log.empty() || result.log.back().step != step))
      log_loss(step);
  }
  return result;
}

// Pick lambda from a grid by held-out pair loss over inner trip folds.
inline double select_lambda(const FeaturizedTrips& drowsy_trips,
                            const std::vector<double>& grid,
                            const TrainConfig& config) {
  if (grid.empty()) throw Error("select_lambda: empty grid");
  if (grid.size() == 1) return grid.front();

  TrainConfig inner = config;
  inner.iterations = std::max<long>(1, config.iterations / 4);
  inner.loss_report_every = 0;

  const std::size_t n = drowsy_trips.size();
  const std::size_t k = std::min<std::size_t>(3, n);
  double best_lambda = grid.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double mean_loss = 0.0;
    if (n >= 2) {
      for (std::size_t fold = 0; fold < k; ++fold) {
        FeaturizedTrips fit_trips, holdout;
        for (std::size_t i = 0; i < n; ++i)
          (i % k == fold ? holdout : fit_trips).push_back(drowsy_trips[i]);
        TrainConfig fc = inner;
        fc.seed = config.seed + 7919 * (fold + 1);
        const auto r = train(fit_trips, fc, lambda);
        Rng probe(fc.seed ^ 0x5e1ec7ed);
        mean_loss += empirical_loss(r.model, holdout, 5000, &probe);
      }
      mean_loss /= static_cast<double>(k);
    } else {
      // Single drowsy trip: fall back to in-sample subsampled loss.
      const auto r = train(drowsy_trips, inner, lambda);
      Rng probe(config.seed ^ 0x5e1ec7ed);
      mean_loss = empirical_loss(r.model, drowsy_trips, 5000, &probe);
    }
    if (mean_loss < best_loss) {
      best_loss = mean_loss;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

// All features ordered by |weight| descending, ties broken by name.
inline std::vector<std::pair<std::string, double>> report_weights(
    const LinearModel& model) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < model.theta.size(); ++i) {
    std::string name = i < model.feature_names.size() ? model.feature_names[i]
                                                      : "f" + std::to_string(i);
    out.emplace_back(std::move(name), model.theta[i]);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const double ma = std::abs(a.second), mb = std::abs(b.second);
    if (ma != mb) return ma > mb;
    return a.first < b.first;
  });
  return out;
}

inline void save_model(const LinearModel& model, const std::filesystem::path& path,
                       const std::string& tag = "drowsyrank-model v1") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file: " + path.string());
  out << tag << '\n';
  out << "D=" << model.theta.size() << " lambda=" << format_double(model.lambda)
      << '\n';
  for (std::size_t i = 0; i < model.theta.size(); ++i) {
    std::string name = i < model.feature_names.size() ? model.feature_names[i]
                                                      : "f" + std::to_string(i);
    out << name << ' ' << format_double(model.theta[i]) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

inline LinearModel load_model(const std::filesystem::path& path,
                              const std::string& tag = "drowsyrank-model v1") {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != tag)
    throw ModelFormatError("bad model tag in " + path.string());
  if (!std::getline(in, line)) throw ModelFormatError("truncated model file");
  std::size_t dim = 0;
  double lambda = 0.0;
  {
    auto body = trim(line);
    auto sp = body.find(' ');
    if (sp == std::string_view::npos || body.substr(0, 2) != "D=" ||
        body.substr(sp + 1, 7) != "lambda=")
      throw ModelFormatError("bad model header line: " + std::string(body));
    dim = static_cast<std::size_t>(std::stoul(std::string(body.substr(2, sp - 2))));
    if (!parse_double(body.substr(sp + 8), lambda))
      throw ModelFormatError("bad lambda in model header");
  }
  LinearModel model;
  model.lambda = lambda;
  for (std::size_t i = 0; i < dim; ++i) {
    if (!std::getline(in, line)) throw ModelFormatError("truncated model file");
    auto body = trim(line);
    auto sp = body.rfind(' ');
    if (sp == std::string_view::npos)
      throw ModelFormatError("bad weight line: " + std::string(body));
    double w = 0.0;
    if (!parse_double(body.substr(sp + 1), w))
      throw ModelFormatError("bad weight value: " + std::string(body));
    model.feature_names.emplace_back(body.substr(0, sp));
    model.theta.push_back(w);
  }
  return model;
}

inline void write_train_log(const std::vector<TrainLogEntry>& log,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write training log: " + path.string());
  out << "step,subsampled_loss\n";
  for (const auto& e : log)
    out << e.step << ',' << format_double(e.loss) << '\n';
}

}  // namespace drowsyrank::ranker
