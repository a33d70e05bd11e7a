#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drowsyrank/features.hpp"
#include "drowsyrank/lasso.hpp"
#include "drowsyrank/rng.hpp"
#include "drowsyrank/text.hpp"

namespace drowsyrank::baselines {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingleClassData : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l1_strength = 0.0;
  std::vector<std::string> feature_names;
};

struct LogisticConfig {
  long iterations = 200000;
  double learning_rate = 0.05;
  double decay = 1e-4;
  std::uint64_t seed = 1;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logistic_score(const LogisticModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size())
    throw DimensionMismatch("logistic_score: dimension mismatch");
  double z = model.bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += model.weights[i] * x[i];
  return sigmoid(z);
}

inline double logistic_loss(const LogisticModel& model,
                            const std::vector<std::vector<double>>& xs,
                            const std::vector<int>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double z = model.bias;
    for (std::size_t j = 0; j < xs[i].size(); ++j) z += model.weights[j] * xs[i][j];
    // log(1 + exp(-y*z)) with y in {-1,+1}, numerically stable
    const double yz = (ys[i] > 0 ? 1.0 : -1.0) * z;
    total += yz >= 0.0 ? std::log1p(std::exp(-yz)) : -yz + std::log1p(std::exp(yz));
  }
  return total / static_cast<double>(xs.size());
}

// Stochastic proximal gradient on the logistic loss: soft-thresholding is
// applied to the weights (not the bias) after every step.
inline LogisticModel logistic_train(const std::vector<std::vector<double>>& xs,
                                    const std::vector<int>& ys, double l1_strength,
                                    const LogisticConfig& config = {}) {
  if (xs.empty() || xs.size() != ys.size())
    throw Error("logistic_train: empty or mismatched inputs");
  bool has_pos = false, has_neg = false;
  for (int y : ys) (y > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw SingleClassData("logistic_train: both classes required");
  if (l1_strength < 0.0) throw Error("logistic_train: l1_strength < 0");

  const std::size_t d = xs.front().size();
  LogisticModel model;
  model.weights.assign(d, 0.0);
  model.l1_strength = l1_strength;

  Rng rng(config.seed);
  for (long k = 0; k < config.iterations; ++k) {
    const std::size_t i = rng.uniform_index(xs.size());
    const auto& x = xs[i];
    if (x.size() != d) throw DimensionMismatch("logistic_train: ragged rows");
    double z = model.bias;
    for (std::size_t j = 0; j < d; ++j) z += model.weights[j] * x[j];
    const double err = sigmoid(z) - (ys[i] > 0 ? 1.0 : 0.0);
    const double eta =
        config.learning_rate / (1.0 + config.decay * static_cast<double>(k));
    for (std::size_t j = 0; j < d; ++j)
      model.weights[j] =
          soft_threshold(model.weights[j] - eta * err * x[j], eta * l1_strength);
    model.bias -= eta * err;
  }
  return model;
}

// Anomaly-detection baseline: sum of per-channel conditional-Gaussian scores.
inline double anomaly_baseline_score(std::span<const double> x_raw,
                                     const features::AnomalyModel& model) {
  const auto scores = features::anomaly_scores(x_raw, model);
  return std::accumulate(scores.begin(), scores.end(), 0.0);
}

inline void save_logistic_model(const LogisticModel& model,
                                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file: " + path.string());
  out << "drowsyrank-logistic v1\n";
  out << "D=" << model.weights.size() << " lambda=" << format_double(model.l1_strength)
      << " bias=" << format_double(model.bias) << '\n';
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    std::string name = i < model.feature_names.size() ? model.feature_names[i]
                                                      : "f" + std::to_string(i);
    out << name << ' ' << format_double(model.weights[i]) << '\n';
  }
}

inline LogisticModel load_logistic_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != "drowsyrank-logistic v1")
    throw Error("bad logistic model tag in " + path.string());
  if (!std::getline(in, line)) throw Error("truncated logistic model file");
  LogisticModel model;
  std::size_t dim = 0;
  {
    auto body = std::string(trim(line));
    std::size_t dpos = body.find("D=");
    std::size_t lpos = body.find(" lambda=");
    std::size_t bpos = body.find(" bias=");
    if (dpos != 0 || lpos == std::string::npos || bpos == std::string::npos)
      throw Error("bad logistic model header: " + body);
    dim = std::stoul(body.substr(2, lpos - 2));
    if (!parse_double(body.substr(lpos + 8, bpos - lpos - 8), model.l1_strength) ||
        !parse_double(body.substr(bpos + 6), model.bias))
      throw Error("bad logistic model header values");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (!std::getline(in, line)) throw Error("truncated logistic model file");
    auto body = trim(line);
    auto sp = body.rfind(' ');
    double w = 0.0;
    if (sp == std::string_view::npos || !parse_double(body.substr(sp + 1), w))
      throw Error("bad logistic weight line");
    model.feature_names.emplace_back(body.substr(0, sp));
    model.weights.push_back(w);
  }
  return model;
}

}  // namespace drowsyrank::baselines
