#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "drowsyrank/data.hpp"
#include "drowsyrank/features.hpp"
#include "drowsyrank/text.hpp"

namespace drowsyrank::pipeline {

using data::Trip;
using features::AnomalyModel;
using features::FeatureConfig;
using features::FeatureVector;
using features::Standardizer;

// Everything fitted on a training split that is needed to turn a raw trip
// into model-ready feature vectors.
struct Pipeline {
  FeatureConfig config;
  AnomalyModel anomaly;          // fitted iff config.include_anomaly
  Standardizer standardizer;     // fitted iff config.standardize
  std::vector<std::string> feature_names;
  std::vector<std::string> anomaly_fit_trip_ids;  // fitting log
};

struct FeaturizedTrip {
  std::string id;
  data::TripLabel label = data::TripLabel::Normal;
  std::vector<FeatureVector> vectors;
  // aligned with vectors (frame 1 onward)
  std::optional<std::vector<int>> truth;
};

inline std::vector<std::vector<double>> collect_raw_rows(
    const std::vector<const Trip*>& trips, std::size_t row_cap) {
  std::size_t total = 0;
  for (const auto* t : trips) total += t->frames.size();
  const std::size_t stride = row_cap > 0 ? std::max<std::size_t>(1, total / row_cap) : 1;
  std::vector<std::vector<double>> rows;
  rows.reserve(row_cap > 0 ? std::min(total, row_cap + trips.size()) : total);
  std::size_t k = 0;
  for (const auto* t : trips)
    for (const auto& f : t->frames) {
      if (k++ % stride == 0) {
        const auto r = features::raw6(f);
        rows.emplace_back(r.begin(), r.end());
      }
    }
  return rows;
}

// Fits the anomaly model on the normal trips of the training split and the
// standardizer on feature vectors of the whole training split.
inline Pipeline fit_pipeline(const std::vector<const Trip*>& training,
                             const FeatureConfig& config, double anomaly_alpha = 0.1,
                             std::size_t anomaly_row_cap = 20000) {
  if (!config.valid())
    throw features::Error("fit_pipeline: no feature group enabled");
  Pipeline p;
  p.config = config;
  p.feature_names = features::feature_names(config);

  if (config.include_anomaly) {
    std::vector<const Trip*> normals;
    for (const auto* t : training)
      if (t->label == data::TripLabel::Normal) normals.push_back(t);
    if (normals.empty())
      throw features::Error("fit_pipeline: anomaly features need normal trips");
    for (const auto* t : normals) p.anomaly_fit_trip_ids.push_back(t->id);
    auto rows = collect_raw_rows(normals, anomaly_row_cap);
    std::vector<std::string> names(features::raw_channel_names().begin(),
                                   features::raw_channel_names().end());
    p.anomaly = features::fit_anomaly_model(rows, anomaly_alpha, std::move(names));
  }

  if (config.standardize) {
    std::vector<std::vector<FeatureVector>> per_trip;
    per_trip.reserve(training.size());
    for (const auto* t : training)
      per_trip.push_back(features::featurize(
          *t, config.include_anomaly ? &p.anomaly : nullptr, config));
    std::vector<const FeatureVector*> all;
    for (const auto& vecs : per_trip)
      for (const auto& v : vecs) all.push_back(&v);
    p.standardizer = features::fit_standardizer(all);
  }
  return p;
}

inline FeaturizedTrip apply_pipeline(const Pipeline& p, const Trip& trip) {
  FeaturizedTrip out;
  out.id = trip.id;
  out.label = trip.label;
  out.vectors = features::featurize(
      trip, p.config.include_anomaly ? &p.anomaly : nullptr, p.config);
  if (p.config.standardize) features::apply_standardizer(out.vectors, p.standardizer);
  if (trip.truth) {
    out.truth.emplace(trip.truth->begin() + 1, trip.truth->end());
  }
  return out;
}

namespace detail {

inline void write_vector(std::ofstream& out, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    out << (i ? " " : "") << format_double(v[i]);
  out << '\n';
}

inline std::vector<double> read_vector(std::ifstream& in, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v)
    if (!(in >> x)) throw features::Error("pipeline file: truncated vector");
  return v;
}

}  // namespace detail

inline void save_pipeline(const Pipeline& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw features::Error("cannot write pipeline file: " + path.string());
  out << "drowsyrank-pipeline v1\n";
  out << "config lag=" << p.config.include_lag
      << " derivatives=" << p.config.include_derivatives
      << " anomaly=" << p.config.include_anomaly
      << " standardize=" << p.config.standardize << '\n';
  if (p.config.include_anomaly) {
    const std::size_t c = p.anomaly.channels();
    out << "anomaly " << c << '\n';
    detail::write_vector(out, p.anomaly.mu);
    for (const auto& row : p.anomaly.precision) detail::write_vector(out, row);
  }
  if (p.config.standardize) {
    out << "standardizer " << p.standardizer.mean.size() << '\n';
    detail::write_vector(out, p.standardizer.mean);
    detail::write_vector(out, p.standardizer.sd);
  }
}

inline Pipeline load_pipeline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw features::Error("cannot open pipeline file: " + path.string());
  std::string tag, word;
  std::getline(in, tag);
  if (std::string(trim(tag)) != "drowsyrank-pipeline v1")
    throw features::Error("bad pipeline tag in " + path.string());
  Pipeline p;
  int lag = 0, deriv = 0, anom = 0, stdz = 0;
  std::string cfg_line;
  std::getline(in, cfg_line);
  if (std::sscanf(cfg_line.c_str(),
                  "config lag=%d derivatives=%d anomaly=%d standardize=%d", &lag,
                  &deriv, &anom, &stdz) != 4)
    throw features::Error("bad pipeline config line");
  p.config = {lag != 0, deriv != 0, anom != 0, stdz != 0};
  p.feature_names = features::feature_names(p.config);
  if (p.config.include_anomaly) {
    std::size_t c = 0;
    if (!(in >> word >> c) || word != "anomaly")
      throw features::Error("bad pipeline anomaly section");
    p.anomaly.mu = detail::read_vector(in, c);
    p.anomaly.precision.resize(c);
    for (auto& row : p.anomaly.precision) row = detail::read_vector(in, c);
    p.anomaly.channel_names.assign(features::raw_channel_names().begin(),
                                   features::raw_channel_names().end());
  }
  if (p.config.standardize) {
    std::size_t d = 0;
    if (!(in >> word >> d) || word != "standardizer")
      throw features::Error("bad pipeline standardizer section");
    p.standardizer.mean = detail::read_vector(in, d);
    p.standardizer.sd = detail::read_vector(in, d);
  }
  return p;
}

}  // namespace drowsyrank::pipeline
