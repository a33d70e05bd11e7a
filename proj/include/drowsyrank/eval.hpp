#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "drowsyrank/baselines.hpp"
#include "drowsyrank/data.hpp"
#include "drowsyrank/pipeline.hpp"
#include "drowsyrank/ranker.hpp"
#include "drowsyrank/rng.hpp"
#include "drowsyrank/text.hpp"

namespace drowsyrank::eval {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingleClassLabels : Error {
  using Error::Error;
};
struct EmptyTrip : Error {
  using Error::Error;
};
struct MissingTimestampTruth : Error {
  using Error::Error;
};
struct KTooLarge : Error {
  using Error::Error;
};

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Curve over unique score thresholds (descending), ties grouped; the stored
// AUC is the trapezoidal area, which with grouped ties equals the
// rank-statistic definition (#{pos>neg} + 0.5*#{pos=neg}) / (n_pos*n_neg).
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error("roc_auc: scores/labels length mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error("roc_auc: non-finite score");
    (labels[i] > 0 ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0)
    throw SingleClassLabels("roc_auc: both classes required");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double thr = scores[order[i]];
    std::size_t group_tp = 0, group_fp = 0;
    while (i < order.size() && scores[order[i]] == thr) {
      (labels[order[i]] > 0 ? group_tp : group_fp)++;
      ++i;
    }
    const double prev_tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double prev_fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    tp += group_tp;
    fp += group_fp;
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    curve.points.push_back({thr, fpr, tpr});
    curve.auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
  }
  return curve;
}

inline std::vector<double> trip_max_scores(
    const std::vector<std::vector<double>>& per_trip_scores) {
  std::vector<double> out;
  out.reserve(per_trip_scores.size());
  for (const auto& scores : per_trip_scores) {
    if (scores.empty()) throw EmptyTrip("trip_max_scores: trip with no scores");
    out.push_back(*std::max_element(scores.begin(), scores.end()));
  }
  return out;
}

struct ScoredTrip {
  std::string id;
  data::TripLabel label;
  std::vector<double> scores;                 // per featurized sample
  std::optional<std::vector<int>> truth;      // aligned with scores
};

// AUC1: trip-level classification via max score.
inline double auc1(const std::vector<ScoredTrip>& trips) {
  std::vector<std::vector<double>> per_trip;
  std::vector<int> labels;
  for (const auto& t : trips) {
    per_trip.push_back(t.scores);
    labels.push_back(t.label == data::TripLabel::Drowsy ? 1 : 0);
  }
  const auto maxima = trip_max_scores(per_trip);
  return roc_auc(maxima, labels).auc;
}

// AUC2: sample-level classification via raw scores against per-timestamp truth.
inline double auc2(const std::vector<ScoredTrip>& trips) {
  std::vector<double> scores;
  std::vector<int> truth;
  for (const auto& t : trips) {
    if (!t.truth)
      throw MissingTimestampTruth("auc2: trip '" + t.id +
                                  "' carries no per-timestamp truth");
    if (t.truth->size() != t.scores.size())
      throw Error("auc2: truth/score length mismatch in trip '" + t.id + "'");
    scores.insert(scores.end(), t.scores.begin(), t.scores.end());
    truth.insert(truth.end(), t.truth->begin(), t.truth->end());
  }
  return roc_auc(scores, truth).auc;
}

struct FoldSpec {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> test_ids;  // one list per fold
};

// Seeded shuffle of each stratum, dealt round-robin to folds.
inline FoldSpec stratified_kfold(const data::Dataset& dataset, int k,
                                 std::uint64_t seed) {
  if (k < 2) throw Error("stratified_kfold: k must be >= 2");
  if (static_cast<std::size_t>(k) > dataset.n_drowsy ||
      static_cast<std::size_t>(k) > dataset.n_normal)
    throw KTooLarge("stratified_kfold: k exceeds trips in a stratum");

  std::vector<std::string> drowsy, normal;
  for (const auto& t : dataset.trips)
    (t.label == data::TripLabel::Drowsy ? drowsy : normal).push_back(t.id);

  Rng rng(seed);
  auto shuffle = [&rng](std::vector<std::string>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.uniform_index(i)]);
  };
  shuffle(drowsy);
  shuffle(normal);

  FoldSpec spec;
  spec.k = k;
  spec.seed = seed;
  spec.test_ids.assign(static_cast<std::size_t>(k), {});
  for (std::size_t i = 0; i < drowsy.size(); ++i)
    spec.test_ids[i % k].push_back(drowsy[i]);
  for (std::size_t i = 0; i < normal.size(); ++i)
    spec.test_ids[i % k].push_back(normal[i]);
  return spec;
}

enum class Method { Proposed, Logistic, Anomaly };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Proposed: return "proposed";
    case Method::Logistic: return "logistic";
    default: return "anomaly";
  }
}

struct FoldResult {
  double auc1 = 0.0;
  std::optional<double> auc2;
};

struct FoldFitLog {
  std::vector<std::string> anomaly_fit_ids;  // trips the anomaly model saw
  std::vector<std::string> train_ids;        // trips the method trained on
};

struct EvalReport {
  std::string method;
  std::vector<FoldResult> folds;
  double mean_auc1 = 0.0;
  std::optional<double> mean_auc2;
  FoldSpec fold_spec;
  std::string config_echo;
  std::vector<FoldFitLog> fit_logs;  // one per fold
};

struct CvConfig {
  features::FeatureConfig feature_config;
  ranker::TrainConfig train_config;
  double lambda = 3e-2;
  // When non-empty, lambda is selected per fold from this grid by inner CV
  // on the training drowsy trips.
  std::vector<double> lambda_grid;
  double anomaly_alpha = 0.1;
  std::size_t anomaly_row_cap = 20000;
  baselines::LogisticConfig logistic;
  double logistic_l1 = 1e-4;
  int jobs = 1;
};

namespace detail {

struct FoldOutcome {
  std::map<Method, FoldResult> results;
  std::map<Method, FoldFitLog> logs;
  std::map<Method, double> chosen_lambda;
};

inline FoldOutcome run_fold(const data::Dataset& dataset,
                            const std::set<std::string>& test_set,
                            const std::vector<Method>& methods,
                            const CvConfig& config, std::uint64_t fold_seed) {
  std::vector<const data::Trip*> training, test;
  for (const auto& t : dataset.trips)
    (test_set.count(t.id) ? test : training).push_back(&t);
  if (test.empty() || training.empty()) throw Error("run_fold: degenerate split");

  const auto pipe = pipeline::fit_pipeline(training, config.feature_config,
                                           config.anomaly_alpha,
                                           config.anomaly_row_cap);

  std::vector<pipeline::FeaturizedTrip> train_feat, test_feat;
  for (const auto* t : training) train_feat.push_back(pipeline::apply_pipeline(pipe, *t));
  for (const auto* t : test) test_feat.push_back(pipeline::apply_pipeline(pipe, *t));

  const bool have_truth = std::all_of(
      test_feat.begin(), test_feat.end(),
      [](const pipeline::FeaturizedTrip& t) { return t.truth.has_value(); });

  auto finish = [&](std::vector<ScoredTrip> scored) {
    FoldResult r;
    r.auc1 = auc1(scored);
    if (have_truth) r.auc2 = auc2(scored);
    return r;
  };

  FoldOutcome outcome;
  for (Method method : methods) {
    FoldFitLog log;
    log.anomaly_fit_ids = pipe.anomaly_fit_trip_ids;
    std::vector<ScoredTrip> scored;

    if (method == Method::Proposed) {
      ranker::FeaturizedTrips drowsy;
      for (const auto& ft : train_feat)
        if (ft.label == data::TripLabel::Drowsy) {
          drowsy.push_back(ft.vectors);
          log.train_ids.push_back(ft.id);
        }
      ranker::TrainConfig tc = config.train_config;
      tc.seed = fold_seed;
      double lambda = config.lambda;
      if (!config.lambda_grid.empty())
        lambda = ranker::select_lambda(drowsy, config.lambda_grid, tc);
      outcome.chosen_lambda[method] = lambda;
      const auto trained = ranker::train(drowsy, tc, lambda, pipe.feature_names);
      for (const auto& ft : test_feat) {
        ScoredTrip st{ft.id, ft.label, {}, ft.truth};
        for (const auto& v : ft.vectors)
          st.scores.push_back(ranker::score(trained.model, v));
        scored.push_back(std::move(st));
      }
    } else if (method == Method::Logistic) {
      std::vector<std::vector<double>> xs;
      std::vector<int> ys;
      for (const auto& ft : train_feat) {
        log.train_ids.push_back(ft.id);
        const int y = ft.label == data::TripLabel::Drowsy ? 1 : 0;
        for (const auto& v : ft.vectors) {
          xs.push_back(v.values);
          ys.push_back(y);
        }
      }
      baselines::LogisticConfig lc = config.logistic;
      lc.seed = fold_seed;
      const auto model = baselines::logistic_train(xs, ys, config.logistic_l1, lc);
      for (const auto& ft : test_feat) {
        ScoredTrip st{ft.id, ft.label, {}, ft.truth};
        for (const auto& v : ft.vectors)
          st.scores.push_back(baselines::logistic_score(model, v.values));
        scored.push_back(std::move(st));
      }
    } else {  // Anomaly: score with the normal-trip graphical model directly
      log.train_ids = pipe.anomaly_fit_trip_ids;
      for (std::size_t ti = 0; ti < test.size(); ++ti) {
        const data::Trip& trip = *test[ti];
        ScoredTrip st{trip.id, trip.label, {}, test_feat[ti].truth};
        for (std::size_t i = 1; i < trip.frames.size(); ++i) {
          const auto raw = features::raw6(trip.frames[i]);
          st.scores.push_back(baselines::anomaly_baseline_score(raw, pipe.anomaly));
        }
        scored.push_back(std::move(st));
      }
    }
    outcome.results[method] = finish(std::move(scored));
    outcome.logs[method] = std::move(log);
  }
  return outcome;
}

}  // namespace detail

// Shared-pipeline cross-validation for one or more methods. Folds are
// independent; with jobs > 1 they run concurrently and are merged by index.
inline std::vector<EvalReport> cross_validate_all(const data::Dataset& dataset,
                                                  const std::vector<Method>& methods,
                                                  int k, std::uint64_t seed,
                                                  const CvConfig& config) {
  if (methods.empty()) throw Error("cross_validate_all: no methods");
  const bool need_anomaly =
      config.feature_config.include_anomaly ||
      std::find(methods.begin(), methods.end(), Method::Anomaly) != methods.end();
  if (need_anomaly && !config.feature_config.include_anomaly &&
      std::find(methods.begin(), methods.end(), Method::Anomaly) != methods.end()) {
    // the anomaly baseline needs the graphical model even if the feature
    // group is disabled; fit_pipeline fits it only when the group is on
    throw Error("cross_validate_all: anomaly method requires anomaly features enabled");
  }

  const FoldSpec spec = stratified_kfold(dataset, k, seed);
  std::vector<detail::FoldOutcome> outcomes(spec.test_ids.size());

  auto run = [&](std::size_t f) {
    std::set<std::string> test_set(spec.test_ids[f].begin(), spec.test_ids[f].end());
    outcomes[f] = detail::run_fold(dataset, test_set, methods, config,
                                   seed + static_cast<std::uint64_t>(f));
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (std::size_t f = 0; f < outcomes.size(); ++f) run(f);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t f = next.fetch_add(1);
          if (f >= outcomes.size()) return;
          run(f);
        }
      });
    for (auto& t : pool) t.join();
  }

  std::vector<EvalReport> reports;
  for (Method method : methods) {
    EvalReport rep;
    rep.method = method_name(method);
    rep.fold_spec = spec;
    double sum1 = 0.0, sum2 = 0.0;
    bool all_auc2 = true;
    for (auto& o : outcomes) {
      const FoldResult& r = o.results.at(method);
      rep.folds.push_back(r);
      rep.fit_logs.push_back(o.logs.at(method));
      sum1 += r.auc1;
      if (r.auc2)
        sum2 += *r.auc2;
      else
        all_auc2 = false;
    }
    rep.mean_auc1 = sum1 / static_cast<double>(rep.folds.size());
    if (all_auc2) rep.mean_auc2 = sum2 / static_cast<double>(rep.folds.size());
    reports.push_back(std::move(rep));
  }
  return reports;
}

inline EvalReport cross_validate(const data::Dataset& dataset, Method method, int k,
                                 std::uint64_t seed, const CvConfig& config) {
  return cross_validate_all(dataset, {method}, k, seed, config).front();
}

inline void export_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write ROC csv: " + path.string());
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
        << format_double(p.tpr) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

inline void export_report(const std::vector<EvalReport>& reports,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report csv: " + path.string());
  for (const auto& rep : reports) {
    out << "# method: " << rep.method << '\n';
    out << "fold,auc1,auc2\n";
    for (std::size_t f = 0; f < rep.folds.size(); ++f) {
      out << f << ',' << format_double(rep.folds[f].auc1) << ',';
      if (rep.folds[f].auc2) out << format_double(*rep.folds[f].auc2);
      out << '\n';
    }
    out << "mean," << format_double(rep.mean_auc1) << ',';
    if (rep.mean_auc2) out << format_double(*rep.mean_auc2);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

inline void export_report(const EvalReport& report, const std::filesystem::path& path) {
  export_report(std::vector<EvalReport>{report}, path);
}

}  // namespace drowsyrank::eval
