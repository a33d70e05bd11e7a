#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drowsyrank/data.hpp"
#include "drowsyrank/lasso.hpp"

namespace drowsyrank::features {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TripTooShort : Error {
  using Error::Error;
};
struct DegenerateData : Error {
  using Error::Error;
};
struct NotFitted : Error {
  using Error::Error;
};

inline constexpr std::size_t kRawChannels = 6;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline const std::array<std::string, kRawChannels>& raw_channel_names() {
  static const std::array<std::string, kRawChannels> names = {
      "X-acceleration", "Y-acceleration", "Z-acceleration",
      "Accel-magnitude", "Speed",          "Direction"};
  return names;
}

inline const std::array<std::string, kRawChannels>& derivative_names() {
  static const std::array<std::string, kRawChannels> names = {
      "X-jerk", "Y-jerk", "Z-jerk", "Magnitude-derivative",
      "Speed-derivative", "Direction-derivative"};
  return names;
}

struct FeatureVector {
  std::string trip_id;
  double t = 0.0;
  std::vector<double> values;
};

struct FeatureConfig {
  bool include_lag = true;          // raw channels at t and t-1 (12 values)
  bool include_derivatives = true;  // 6 values
  bool include_anomaly = true;      // 6 values
  bool standardize = true;

  std::size_t dimension() const {
    return (include_lag ? 2 * kRawChannels : 0) +
           (include_derivatives ? kRawChannels : 0) +
           (include_anomaly ? kRawChannels : 0);
  }
  bool valid() const { return dimension() > 0; }
};

inline std::vector<std::string> feature_names(const FeatureConfig& config) {
  std::vector<std::string> names;
  if (config.include_lag) {
    for (const auto& n : raw_channel_names()) names.push_back(n);
    for (const auto& n : raw_channel_names()) names.push_back(n + "-lag");
  }
  if (config.include_derivatives)
    for (const auto& n : derivative_names()) names.push_back(n);
  if (config.include_anomaly)
    for (const auto& n : raw_channel_names()) names.push_back("Anomaly-" + n);
  return names;
}

inline std::array<double, kRawChannels> raw6(const data::SensorFrame& f) {
  const double mag = std::sqrt(f.ax * f.ax + f.ay * f.ay + f.az * f.az);
  return {f.ax, f.ay, f.az, mag, f.speed, f.direction};
}

// Raw output at t followed by the same six channels at t-1.
inline std::array<double, 2 * kRawChannels> raw_channels(
    const data::SensorFrame& frame, const data::SensorFrame& prev) {
  if (!(prev.t < frame.t))
    throw Error("raw_channels: prev frame must precede frame in time");
  std::array<double, 2 * kRawChannels> out{};
  const auto cur = raw6(frame);
  const auto old = raw6(prev);
  for (std::size_t i = 0; i < kRawChannels; ++i) {
    out[i] = cur[i];
    out[kRawChannels + i] = old[i];
  }
  return out;
}

// Shortest-arc heading difference, mapped into (-180, 180].
inline double direction_delta(double to, double from) {
  double d = std::remainder(to - from, 360.0);
  if (d <= -180.0) d += 360.0;
  return d;
}

// Backward finite differences of the six raw channels; the first frame gets
// zeros (no predecessor). Direction is differenced on the shortest arc.
inline std::vector<std::array<double, kRawChannels>> derivatives(
    const std::vector<data::SensorFrame>& frames) {
  if (frames.size() < 2) throw TripTooShort("derivatives: need >= 2 frames");
  std::vector<std::array<double, kRawChannels>> out(frames.size());
  out[0].fill(0.0);
  auto prev = raw6(frames[0]);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto cur = raw6(frames[i]);
    const double dt = frames[i].t - frames[i - 1].t;
    for (std::size_t c = 0; c < kRawChannels; ++c) {
      const double dv = (c == 5) ? direction_delta(cur[c], prev[c]) : cur[c] - prev[c];
      out[i][c] = dv / dt;
    }
    prev = cur;
  }
  return out;
}

// Sparse Gaussian graphical model over the raw channels, fitted by
// per-channel neighborhood Lasso regressions and symmetrized.
struct AnomalyModel {
  std::vector<double> mu;                       // per-channel mean
  std::vector<std::vector<double>> precision;   // symmetric, raw scale
  std::vector<std::string> channel_names;
  std::vector<std::string> warnings;

  bool fitted() const { return !mu.empty(); }
  std::size_t channels() const { return mu.size(); }
};

inline AnomalyModel fit_anomaly_model(
    const std::vector<std::vector<double>>& samples, double alpha,
    std::vector<std::string> channel_names = {}) {
  if (samples.empty()) throw Error("fit_anomaly_model: no samples");
  const std::size_t p = samples.front().size();
  const std::size_t n = samples.size();
  if (alpha < 0.0) throw Error("fit_anomaly_model: alpha < 0");
  if (n < 2 * p) throw Error("fit_anomaly_model: need at least 2*channels samples");
  for (const auto& row : samples)
    if (row.size() != p) throw Error("fit_anomaly_model: ragged sample rows");

  AnomalyModel model;
  model.channel_names = std::move(channel_names);
  if (model.channel_names.empty())
    for (std::size_t j = 0; j < p; ++j)
      model.channel_names.push_back("ch" + std::to_string(j));

  constexpr double kVarFloor = 1e-8;

  // Standardize channels internally; precision mapped back to raw scale.
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (const auto& row : samples)
    for (std::size_t j = 0; j < p; ++j) mean[j] += row[j];
  for (std::size_t j = 0; j < p; ++j) mean[j] /= static_cast<double>(n);
  for (const auto& row : samples)
    for (std::size_t j = 0; j < p; ++j) {
      const double d = row[j] - mean[j];
      sd[j] += d * d;
    }
  for (std::size_t j = 0; j < p; ++j) {
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
    if (sd[j] < 1e-8) {
      model.warnings.push_back("DegenerateData: channel " + model.channel_names[j] +
                               " is constant; variance floor applied");
      sd[j] = 1e-8;
    }
  }

  std::vector<std::vector<double>> z(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) z[j][i] = (samples[i][j] - mean[j]) / sd[j];

  // Neighborhood regressions in standardized space.
  std::vector<std::vector<double>> prec_z(p, std::vector<double>(p, 0.0));
  std::vector<double> resid_var(p, 0.0);
  std::vector<std::vector<double>> neighbor_w(p);
  for (std::size_t i = 0; i < p; ++i) {
    baselines::LassoProblem prob;
    prob.alpha = alpha;
    prob.response = z[i];
    for (std::size_t j = 0; j < p; ++j)
      if (j != i) prob.columns.push_back(z[j]);
    auto fit = baselines::lasso_fit(prob, 1e-9, 2000);
    neighbor_w[i] = fit.weights;

    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double res = z[i][r];
      std::size_t k = 0;
      for (std::size_t j = 0; j < p; ++j)
        if (j != i) res -= fit.weights[k++] * z[j][r];
      sq += res * res;
    }
    double v = sq / static_cast<double>(n);
    if (v < kVarFloor) {
      model.warnings.push_back("DegenerateData: channel " + model.channel_names[i] +
                               " has (near) zero residual variance; floor applied");
      v = kVarFloor;
    }
    resid_var[i] = v;
    prec_z[i][i] = 1.0 / v;
  }
  for (std::size_t i = 0; i < p; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      prec_z[i][j] += -neighbor_w[i][k] / resid_var[i];
      ++k;
    }
  }
  // Symmetrize: average the two neighborhood estimates of each off-diagonal.
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      const double v = 0.5 * (prec_z[i][j] + prec_z[j][i]);
      prec_z[i][j] = v;
      prec_z[j][i] = v;
    }

  model.mu = mean;
  model.precision.assign(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      model.precision[i][j] = prec_z[i][j] / (sd[i] * sd[j]);
  return model;
}

// Per-channel score: negative log conditional Gaussian density of channel i
// given the others, s_i = 0.5*ln(2*pi/prec_ii) + (prec_ii/2)*(x_i - cond_mean)^2.
inline std::vector<double> anomaly_scores(std::span<const double> x_raw,
                                          const AnomalyModel& model) {
  if (!model.fitted()) throw NotFitted("anomaly_scores: model not fitted");
  const std::size_t p = model.channels();
  if (x_raw.size() != p) throw Error("anomaly_scores: channel count mismatch");
  std::vector<double> scores(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double lii = model.precision[i][i];
    double cross = 0.0;
    for (std::size_t j = 0; j < p; ++j)
      if (j != i) cross += model.precision[i][j] * (x_raw[j] - model.mu[j]);
    const double cond_mean = model.mu[i] - cross / lii;
    const double r = x_raw[i] - cond_mean;
    scores[i] = 0.5 * std::log(kTwoPi / lii) + 0.5 * lii * r * r;
  }
  return scores;
}

// One feature vector per frame from the second frame onward.
inline std::vector<FeatureVector> featurize(const data::Trip& trip,
                                            const AnomalyModel* model,
                                            const FeatureConfig& config) {
  if (!config.valid()) throw Error("featurize: no feature group enabled");
  if (trip.frames.size() < 2) throw TripTooShort("featurize: trip '" + trip.id +
                                                 "' has fewer than 2 frames");
  if (config.include_anomaly && (model == nullptr || !model->fitted()))
    throw NotFitted("featurize: anomaly model required but not fitted");

  std::vector<std::array<double, kRawChannels>> derivs;
  if (config.include_derivatives) derivs = derivatives(trip.frames);

  std::vector<FeatureVector> out;
  out.reserve(trip.frames.size() - 1);
  for (std::size_t i = 1; i < trip.frames.size(); ++i) {
    FeatureVector fv;
    fv.trip_id = trip.id;
    fv.t = trip.frames[i].t;
    fv.values.reserve(config.dimension());
    if (config.include_lag) {
      const auto rc = raw_channels(trip.frames[i], trip.frames[i - 1]);
      fv.values.insert(fv.values.end(), rc.begin(), rc.end());
    }
    if (config.include_derivatives)
      fv.values.insert(fv.values.end(), derivs[i].begin(), derivs[i].end());
    if (config.include_anomaly) {
      const auto raw = raw6(trip.frames[i]);
      const auto sc = anomaly_scores(raw, *model);
      fv.values.insert(fv.values.end(), sc.begin(), sc.end());
    }
    out.push_back(std::move(fv));
  }
  return out;
}

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;  // floored at 1e-8

  bool fitted() const { return !mean.empty(); }
};

inline Standardizer fit_standardizer(const std::vector<const FeatureVector*>& vectors) {
  if (vectors.size() < 2) throw Error("fit_standardizer: need >= 2 vectors");
  const std::size_t d = vectors.front()->values.size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.sd.assign(d, 0.0);
  for (const auto* v : vectors) {
    if (v->values.size() != d) throw Error("fit_standardizer: dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += v->values[j];
  }
  const double inv_n = 1.0 / static_cast<double>(vectors.size());
  for (std::size_t j = 0; j < d; ++j) s.mean[j] *= inv_n;
  for (const auto* v : vectors)
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = v->values[j] - s.mean[j];
      s.sd[j] += dv * dv;
    }
  for (std::size_t j = 0; j < d; ++j)
    s.sd[j] = std::max(std::sqrt(s.sd[j] * inv_n), 1e-8);
  return s;
}

inline void apply_standardizer(FeatureVector& v, const Standardizer& s) {
  if (v.values.size() != s.mean.size())
    throw Error("apply_standardizer: dimension mismatch");
  for (std::size_t j = 0; j < v.values.size(); ++j)
    v.values[j] = (v.values[j] - s.mean[j]) / s.sd[j];
}

inline void apply_standardizer(std::vector<FeatureVector>& vectors,
                               const Standardizer& s) {
  for (auto& v : vectors) apply_standardizer(v, s);
}

}  // namespace drowsyrank::features
