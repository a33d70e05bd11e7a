#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drowsyrank/drowsyrank.hpp"

namespace fs = std::filesystem;
using namespace drowsyrank;

namespace {

struct CommonTrainFlags {
  std::uint64_t seed = 1;
  long iterations = 200000;
  std::string optimizer = "adam";
  double learning_rate = 0.0;  // 0 = optimizer default
  double decay = 0.0;
  double min_time_gap = 0.0;
  double lambda = 3e-2;
  std::vector<double> lambda_grid;
  double anomaly_alpha = 0.1;
  bool no_lag = false, no_derivatives = false, no_anomaly = false,
       no_standardize = false;

  features::FeatureConfig feature_config() const {
    return {!no_lag, !no_derivatives, !no_anomaly, !no_standardize};
  }

  ranker::TrainConfig train_config() const {
    ranker::TrainConfig tc;
    tc.seed = seed;
    tc.iterations = iterations;
    tc.min_time_gap = min_time_gap;
    tc.optimizer = optimizer == "sgd" ? ranker::OptimizerKind::Sgd
                                      : ranker::OptimizerKind::Adam;
    if (learning_rate > 0.0) {
      tc.sgd.learning_rate = learning_rate;
      tc.adam.learning_rate = learning_rate;
    }
    tc.sgd.decay = decay;
    return tc;
  }
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--iterations", f.iterations, "SGD iterations")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--optimizer", f.optimizer, "sgd or adam")
      ->check(CLI::IsMember({"sgd", "adam"}));
  cmd->add_option("--lr", f.learning_rate, "learning rate (optimizer default if unset)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--decay", f.decay, "SGD learning-rate decay")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-time-gap", f.min_time_gap,
                  "minimum seconds between paired samples")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda", f.lambda, "L2 regularization strength")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda-grid", f.lambda_grid,
                  "grid for per-fold lambda selection (overrides --lambda)")
      ->delimiter(',');
  cmd->add_option("--alpha", f.anomaly_alpha, "L1 strength for the anomaly model")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--no-lag", f.no_lag, "drop lagged raw channels");
  cmd->add_flag("--no-derivatives", f.no_derivatives, "drop time derivatives");
  cmd->add_flag("--no-anomaly", f.no_anomaly, "drop anomaly-score features");
  cmd->add_flag("--no-standardize", f.no_standardize, "skip feature standardization");
}

std::vector<const data::Trip*> all_trips(const data::Dataset& ds) {
  std::vector<const data::Trip*> out;
  for (const auto& t : ds.trips) out.push_back(&t);
  return out;
}

int cmd_synth(const std::string& out_dir, int n_drowsy, int n_normal, int len_min,
              int len_max, std::uint64_t seed) {
  synth::SynthConfig config;
  config.n_drowsy = n_drowsy;
  config.n_normal = n_normal;
  config.trip_len_min = len_min;
  config.trip_len_max = len_max;
  config.seed = seed;
  const auto ds = synth::generate_dataset(config, out_dir);
  std::cout << "wrote " << ds.trips.size() << " trips (" << ds.n_drowsy
            << " drowsy, " << ds.n_normal << " normal) to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& out,
              const std::string& log_path, const CommonTrainFlags& flags) {
  const auto ds = data::parse_manifest(manifest);
  if (ds.n_drowsy == 0) {
    std::cerr << "error: training requires at least one drowsy trip (got 0)\n";
    return 1;
  }
  const auto pipe = pipeline::fit_pipeline(all_trips(ds), flags.feature_config(),
                                           flags.anomaly_alpha);
  ranker::FeaturizedTrips drowsy;
  for (const auto& t : ds.trips)
    if (t.label == data::TripLabel::Drowsy)
      drowsy.push_back(pipeline::apply_pipeline(pipe, t).vectors);

  const auto tc = flags.train_config();
  double lambda = flags.lambda;
  if (!flags.lambda_grid.empty())
    lambda = ranker::select_lambda(drowsy, flags.lambda_grid, tc);
  const auto result = ranker::train(drowsy, tc, lambda, pipe.feature_names);

  ranker::save_model(result.model, out);
  pipeline::save_pipeline(pipe, out + ".pipeline");
  if (!log_path.empty()) ranker::write_train_log(result.log, log_path);

  std::cout << "trained on " << drowsy.size() << " drowsy trips, D="
            << result.model.dimension() << ", lambda=" << format_double(lambda)
            << "\n";
  if (!result.log.empty())
    std::cout << "subsampled loss: initial=" << format_double(result.log.front().loss)
              << " final=" << format_double(result.log.back().loss) << "\n";
  std::cout << "model written to " << out << "\n";
  return 0;
}

std::vector<eval::ScoredTrip> score_manifest(const data::Dataset& ds,
                                             const pipeline::Pipeline& pipe,
                                             const ranker::LinearModel& model) {
  std::vector<eval::ScoredTrip> out;
  for (const auto& t : ds.trips) {
    const auto ft = pipeline::apply_pipeline(pipe, t);
    eval::ScoredTrip st{ft.id, ft.label, {}, ft.truth};
    for (const auto& v : ft.vectors) st.scores.push_back(ranker::score(model, v));
    out.push_back(std::move(st));
  }
  return out;
}

int cmd_score(const std::string& model_path, const std::string& pipeline_path,
              const std::string& manifest, const std::string& out) {
  const auto model = ranker::load_model(model_path);
  const auto pipe = pipeline::load_pipeline(
      pipeline_path.empty() ? model_path + ".pipeline" : pipeline_path);
  const auto ds = data::parse_manifest(manifest);
  const auto scored = score_manifest(ds, pipe, model);

  std::ofstream os(out, std::ios::binary);
  if (!os) throw data::IoError("cannot write " + out);
  os << "trip_id,t,score\n";
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const auto ft = pipeline::apply_pipeline(pipe, ds.trips[i]);
    for (std::size_t j = 0; j < scored[i].scores.size(); ++j)
      os << scored[i].id << ',' << format_double(ft.vectors[j].t) << ','
         << format_double(scored[i].scores[j]) << '\n';
  }
  std::cout << "scores written to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& pipeline_path,
             const std::string& manifest, const std::string& roc_prefix,
             bool want_auc2) {
  const auto model = ranker::load_model(model_path);
  const auto pipe = pipeline::load_pipeline(
      pipeline_path.empty() ? model_path + ".pipeline" : pipeline_path);
  const auto ds = data::parse_manifest(manifest);
  const auto scored = score_manifest(ds, pipe, model);

  // trip-level ROC
  std::vector<double> maxima;
  std::vector<int> labels;
  for (const auto& st : scored) {
    maxima.push_back(*std::max_element(st.scores.begin(), st.scores.end()));
    labels.push_back(st.label == data::TripLabel::Drowsy ? 1 : 0);
  }
  const auto roc1 = eval::roc_auc(maxima, labels);
  std::cout << "AUC1=" << format_double(roc1.auc) << "\n";
  if (!roc_prefix.empty()) eval::export_roc_csv(roc1, roc_prefix + "_roc1.csv");

  if (want_auc2) {
    for (const auto& st : scored)
      if (!st.truth) {
        std::cerr << "error: --auc2 requires a per-timestamp truth column; trip '"
                  << st.id << "' has none\n";
        return 1;
      }
    std::vector<double> scores;
    std::vector<int> truth;
    for (const auto& st : scored) {
      scores.insert(scores.end(), st.scores.begin(), st.scores.end());
      truth.insert(truth.end(), st.truth->begin(), st.truth->end());
    }
    const auto roc2 = eval::roc_auc(scores, truth);
    std::cout << "AUC2=" << format_double(roc2.auc) << "\n";
    if (!roc_prefix.empty()) eval::export_roc_csv(roc2, roc_prefix + "_roc2.csv");
  }
  return 0;
}

int cmd_cv(const std::string& manifest, int k, std::uint64_t seed,
           const std::vector<std::string>& method_names, const std::string& out,
           int jobs, const CommonTrainFlags& flags) {
  const auto ds = data::parse_manifest(manifest);
  std::vector<eval::Method> methods;
  for (const auto& name : method_names) {
    if (name == "proposed")
      methods.push_back(eval::Method::Proposed);
    else if (name == "logistic")
      methods.push_back(eval::Method::Logistic);
    else if (name == "anomaly")
      methods.push_back(eval::Method::Anomaly);
    else {
      std::cerr << "error: unknown method '" << name << "'\n";
      return 2;
    }
  }

  eval::CvConfig config;
  config.feature_config = flags.feature_config();
  config.train_config = flags.train_config();
  config.lambda = flags.lambda;
  config.lambda_grid = flags.lambda_grid;
  config.anomaly_alpha = flags.anomaly_alpha;
  config.jobs = jobs;

  const auto reports = eval::cross_validate_all(ds, methods, k, seed, config);
  for (const auto& rep : reports) {
    std::cout << rep.method << ": mean AUC1=" << format_double(rep.mean_auc1);
    if (rep.mean_auc2) std::cout << " mean AUC2=" << format_double(*rep.mean_auc2);
    std::cout << "\n";
  }
  if (!out.empty()) {
    eval::export_report(reports, out);
    std::cout << "report written to " << out << "\n";
  }
  return 0;
}

int cmd_report(const std::string& model_path, int top) {
  const auto model = ranker::load_model(model_path);
  auto ranked = ranker::report_weights(model);
  if (top > 0 && static_cast<std::size_t>(top) < ranked.size())
    ranked.resize(static_cast<std::size_t>(top));
  for (const auto& [name, weight] : ranked)
    std::cout << name << ' ' << format_double(weight) << '\n';
  return 0;
}

int cmd_features(const std::string& manifest, const std::string& out,
                 const CommonTrainFlags& flags) {
  const auto ds = data::parse_manifest(manifest);
  const auto pipe = pipeline::fit_pipeline(all_trips(ds), flags.feature_config(),
                                           flags.anomaly_alpha);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw data::IoError("cannot write " + out);
  os << "trip_id,t";
  for (const auto& n : pipe.feature_names) os << ',' << n;
  os << '\n';
  for (const auto& t : ds.trips) {
    const auto ft = pipeline::apply_pipeline(pipe, t);
    for (const auto& v : ft.vectors) {
      os << ft.id << ',' << format_double(v.t);
      for (double x : v.values) os << ',' << format_double(x);
      os << '\n';
    }
  }
  std::cout << "features written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drowsyrank: weakly supervised driver-drowsiness scoring"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  int n_drowsy = 12, n_normal = 90, len_min = 600, len_max = 1800;
  std::uint64_t synth_seed = 42;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--drowsy", n_drowsy)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--normal", n_normal)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--len-min", len_min)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--len-max", len_max)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the pairwise ranker");
  std::string train_manifest, train_out, train_log;
  CommonTrainFlags train_flags;
  train_cmd->add_option("--manifest", train_manifest)->required();
  train_cmd->add_option("--out", train_out, "model file to write")->required();
  train_cmd->add_option("--log", train_log, "training-log CSV to write");
  add_train_flags(train_cmd, train_flags);

  // score
  auto* score_cmd = app.add_subcommand("score", "per-sample drowsiness scores");
  std::string score_model, score_pipeline, score_manifest_path, score_out;
  score_cmd->add_option("--model", score_model)->required();
  score_cmd->add_option("--pipeline", score_pipeline,
                        "pipeline file (default: <model>.pipeline)");
  score_cmd->add_option("--manifest", score_manifest_path)->required();
  score_cmd->add_option("--out", score_out)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "AUC on a held-out manifest");
  std::string eval_model, eval_pipeline, eval_manifest, eval_roc;
  bool eval_auc2 = false;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--pipeline", eval_pipeline);
  eval_cmd->add_option("--manifest", eval_manifest)->required();
  eval_cmd->add_option("--roc-out", eval_roc, "prefix for ROC CSV export");
  eval_cmd->add_flag("--auc2", eval_auc2, "also compute sample-level AUC2");

  // cv
  auto* cv_cmd = app.add_subcommand("cv", "stratified cross-validation");
  std::string cv_manifest, cv_out;
  int cv_k = 11, cv_jobs = 1;
  std::uint64_t cv_seed = 1;
  std::vector<std::string> cv_methods = {"proposed"};
  CommonTrainFlags cv_flags;
  cv_cmd->add_option("--manifest", cv_manifest)->required();
  cv_cmd->add_option("--k", cv_k)->check(CLI::Range(2, 1000000));
  cv_cmd->add_option("--methods", cv_methods, "proposed,logistic,anomaly")
      ->delimiter(',');
  cv_cmd->add_option("--out", cv_out, "report CSV");
  cv_cmd->add_option("--jobs", cv_jobs)->check(CLI::PositiveNumber);
  cv_cmd->add_option("--cv-seed", cv_seed, "fold-assignment seed");
  add_train_flags(cv_cmd, cv_flags);

  // report
  auto* report_cmd = app.add_subcommand("report", "ranked feature weights");
  std::string report_model;
  int report_top = 0;
  report_cmd->add_option("model", report_model, "model file")->required();
  report_cmd->add_option("--top", report_top, "show only the top N features")
      ->check(CLI::NonNegativeNumber);

  // features
  auto* feat_cmd = app.add_subcommand("features", "export feature matrix CSV");
  std::string feat_manifest, feat_out;
  CommonTrainFlags feat_flags;
  feat_cmd->add_option("--manifest", feat_manifest)->required();
  feat_cmd->add_option("--out", feat_out)->required();
  add_train_flags(feat_cmd, feat_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(synth_out, n_drowsy, n_normal, len_min, len_max, synth_seed);
    if (train_cmd->parsed())
      return cmd_train(train_manifest, train_out, train_log, train_flags);
    if (score_cmd->parsed())
      return cmd_score(score_model, score_pipeline, score_manifest_path, score_out);
    if (eval_cmd->parsed())
      return cmd_eval(eval_model, eval_pipeline, eval_manifest, eval_roc, eval_auc2);
    if (cv_cmd->parsed())
      return cmd_cv(cv_manifest, cv_k, cv_seed, cv_methods, cv_out, cv_jobs, cv_flags);
    if (report_cmd->parsed()) return cmd_report(report_model, report_top);
    if (feat_cmd->parsed()) return cmd_features(feat_manifest, feat_out, feat_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
