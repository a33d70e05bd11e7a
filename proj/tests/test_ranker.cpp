#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "drowsyrank/ranker.hpp"
#include "drowsyrank/rng.hpp"

using namespace drowsyrank;
using features::FeatureVector;
using ranker::FeaturizedTrips;
using ranker::LinearModel;

namespace {

FeatureVector fv(double t, std::vector<double> values, std::string id = "trip") {
  return {std::move(id), t, std::move(values)};
}

LinearModel model_of(std::vector<double> theta, double lambda = 0.0) {
  LinearModel m;
  m.theta = std::move(theta);
  m.lambda = lambda;
  return m;
}

// brute-force mean pair loss over all unordered within-trip pairs
double brute_force_loss(const LinearModel& m, const FeaturizedTrips& trips) {
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& trip : trips) {
    if (trip.size() < 2) continue;
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t a = 0; a < trip.size(); ++a)
      for (std::size_t b = 0; b < trip.size(); ++b) {
        if (a >= b) continue;
        s += ranker::pair_loss(m, trip[a], trip[a].t, trip[b], trip[b].t);
        ++c;
      }
    total += s / c;
    ++used;
  }
  return total / used;
}

}  // namespace

TEST_CASE("score: dot product and dimension checks") {
  CHECK(ranker::score(model_of({1, 0}), fv(0, {2, 7})) == 2.0);
  CHECK(ranker::score(model_of({0, 0}), fv(0, {5, -3})) == 0.0);
  CHECK(ranker::score(model_of({0.5, -0.5}), fv(0, {4, 2})) == 1.0);
  CHECK_THROWS_AS(ranker::score(model_of({1, 2, 3}), fv(0, {1})),
                  ranker::DimensionMismatch);
}

TEST_CASE("pair_loss worked examples") {
  auto m = model_of({1, 0});
  CHECK(ranker::pair_loss(m, fv(10, {2, 0}), 10, fv(3, {0.5, 0}), 3) == 0.0);
  CHECK(ranker::pair_loss(model_of({0, 0}), fv(1, {1, 2}), 1, fv(2, {3, 4}), 2) ==
        1.0);
  CHECK(ranker::pair_loss(m, fv(5, {0.3, 0}), 5, fv(2, {0.5, 0}), 2) ==
        doctest::Approx(1.2).epsilon(1e-15));
  CHECK_THROWS_AS(ranker::pair_loss(m, fv(1, {0, 0}), 1, fv(1, {0, 0}), 1),
                  ranker::EqualTimestamps);
}

TEST_CASE("pair_loss properties: symmetry, non-negativity, shift invariance") {
  Rng rng(41);
  for (int i = 0; i < 10000; ++i) {
    auto m = model_of({rng.normal(), rng.normal(), rng.normal()});
    auto a = fv(rng.uniform(0, 100), {rng.normal(), rng.normal(), rng.normal()});
    auto b = fv(rng.uniform(100.001, 200), {rng.normal(), rng.normal(), rng.normal()});
    const double fwd = ranker::pair_loss(m, a, a.t, b, b.t);
    const double bwd = ranker::pair_loss(m, b, b.t, a, a.t);
    CHECK(fwd == bwd);  // exact
    CHECK(fwd >= 0.0);
  }
  // appending an equal-valued constant dimension shifts both scores equally
  for (int i = 0; i < 100; ++i) {
    auto m = model_of({rng.normal(), rng.normal()});
    auto a = fv(1, {rng.normal(), rng.normal()});
    auto b = fv(2, {rng.normal(), rng.normal()});
    const double base = ranker::pair_loss(m, a, 1, b, 2);
    auto m2 = model_of({m.theta[0], m.theta[1], rng.normal()});
    const double c = rng.normal();
    auto a2 = fv(1, {a.values[0], a.values[1], c});
    auto b2 = fv(2, {b.values[0], b.values[1], c});
    CHECK(ranker::pair_loss(m2, a2, 1, b2, 2) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("pair_subgradient worked examples") {
  // violated margin, t > u, lambda = 0
  auto g = ranker::pair_subgradient(model_of({0, 0}), fv(5, {1, 2}), 5,
                                    fv(1, {3, 1}), 1);
  CHECK(g[0] == -(1.0 - 3.0));
  CHECK(g[1] == -(2.0 - 1.0));

  // satisfied margin, lambda = 0 -> zero vector
  auto g2 = ranker::pair_subgradient(model_of({5, 0}), fv(5, {1, 0}), 5,
                                     fv(1, {0, 0}), 1);
  CHECK(g2[0] == 0.0);
  CHECK(g2[1] == 0.0);

  // satisfied margin, pure regularizer: 2*0.5*(1,-2)
  auto g3 = ranker::pair_subgradient(model_of({1, -2}, 0.5), fv(5, {10, 0}), 5,
                                     fv(1, {0, 0}), 1);
  CHECK(g3[0] == doctest::Approx(1.0));
  CHECK(g3[1] == doctest::Approx(-2.0));
}

TEST_CASE("pair_subgradient matches central finite differences off the kink") {
  Rng rng(42);
  const double step = 1e-6;
  int tested = 0;
  while (tested < 100) {
    const std::size_t d = 3;
    std::vector<double> theta(d), xt(d), xu(d);
    for (auto& v : theta) v = rng.normal();
    for (auto& v : xt) v = rng.normal();
    for (auto& v : xu) v = rng.normal();
    const double lambda = rng.uniform(0.0, 0.5);
    const double t = 7.0, u = 2.0;
    auto m = model_of(theta, lambda);
    const double margin = ranker::score(m, fv(t, xt)) - ranker::score(m, fv(u, xu));
    if (std::abs(1.0 - margin) < 1e-3) continue;  // keep away from the kink
    ++tested;
    auto g = ranker::pair_subgradient(m, fv(t, xt), t, fv(u, xu), u);
    for (std::size_t j = 0; j < d; ++j) {
      auto mp = m, mm = m;
      mp.theta[j] += step;
      mm.theta[j] -= step;
      auto reg = [](const LinearModel& lm) {
        double s = 0;
        for (double v : lm.theta) s += v * v;
        return lm.lambda * s;
      };
      const double fp = ranker::pair_loss(mp, fv(t, xt), t, fv(u, xu), u) + reg(mp);
      const double fm = ranker::pair_loss(mm, fv(t, xt), t, fv(u, xu), u) + reg(mm);
      const double fd = (fp - fm) / (2 * step);
      const double denom = std::max(1.0, std::abs(fd));
      CHECK(std::abs(g[j] - fd) / denom < 1e-6);
    }
  }
}

TEST_CASE("sample_pair: unique pair, determinism, gap filtering") {
  FeaturizedTrips one = {{fv(0, {1}), fv(1, {2})}};
  Rng rng(43);
  for (int i = 0; i < 20; ++i) {
    auto d = ranker::sample_pair(rng, one, 0.0);
    CHECK(d.trip == 0);
    CHECK(d.t_idx != d.u_idx);
    CHECK(d.t_idx < 2);
    CHECK(d.u_idx < 2);
  }

  Rng a(99), b(99);
  FeaturizedTrips trips = {{fv(0, {1}), fv(1, {2}), fv(2, {3})},
                           {fv(0, {1}), fv(5, {2})}};
  for (int i = 0; i < 200; ++i) {
    auto da = ranker::sample_pair(a, trips, 0.0);
    auto db = ranker::sample_pair(b, trips, 0.0);
    CHECK(da.trip == db.trip);
    CHECK(da.t_idx == db.t_idx);
    CHECK(da.u_idx == db.u_idx);
  }

  FeaturizedTrips gappy = {{fv(0, {1}), fv(1, {2}), fv(100, {3})}};
  Rng g(44);
  for (int i = 0; i < 100; ++i) {
    auto d = ranker::sample_pair(g, gappy, 50.0);
    CHECK((d.t_idx == 2 || d.u_idx == 2));  // only pairs involving t=100
    CHECK(std::abs(gappy[0][d.t_idx].t - gappy[0][d.u_idx].t) >= 50.0);
  }

  FeaturizedTrips too_short = {{fv(0, {1})}};
  Rng r2(45);
  CHECK_THROWS_AS(ranker::sample_pair(r2, too_short, 0.0), ranker::NoValidPair);
  FeaturizedTrips gap_out = {{fv(0, {1}), fv(1, {2})}};
  CHECK_THROWS_AS(ranker::sample_pair(r2, gap_out, 10.0), ranker::NoValidPair);
}

TEST_CASE("empirical_loss: exact mode identities and brute-force oracle") {
  // theta = 0 gives exactly 1
  FeaturizedTrips trips = {{fv(0, {1, 0}), fv(1, {2, 0}), fv(2, {0, 1})}};
  CHECK(ranker::empirical_loss(model_of({0, 0}), trips) == 1.0);

  // two vectors, later score exceeds earlier by >= 1
  FeaturizedTrips pair = {{fv(0, {0, 0}), fv(1, {2, 0})}};
  CHECK(ranker::empirical_loss(model_of({1, 0}), pair) == 0.0);

  // random trips against the independent all-pairs oracle
  Rng rng(46);
  for (int rep = 0; rep < 50; ++rep) {
    FeaturizedTrips rt;
    const int n_trips = 1 + int(rng.uniform_index(3));
    for (int i = 0; i < n_trips; ++i) {
      std::vector<FeatureVector> trip;
      const int len = 2 + int(rng.uniform_index(29));
      for (int j = 0; j < len; ++j)
        trip.push_back(fv(j, {rng.normal(), rng.normal()}));
      rt.push_back(std::move(trip));
    }
    auto m = model_of({rng.normal(), rng.normal()});
    CHECK(std::abs(ranker::empirical_loss(m, rt) - brute_force_loss(m, rt)) < 1e-12);
  }
}

TEST_CASE("optimizer_step: SGD and Adam") {
  ranker::TrainConfig sgd;
  sgd.optimizer = ranker::OptimizerKind::Sgd;
  sgd.sgd = {0.1, 0.0};
  ranker::OptimizerState st;
  std::vector<double> theta = {1.0, 1.0};
  ranker::optimizer_step(st, theta, {10.0, 0.0}, sgd);
  CHECK(theta[0] == doctest::Approx(0.0));
  CHECK(theta[1] == 1.0);
  CHECK(st.step == 1);

  // zero gradient leaves theta unchanged for both optimizers
  ranker::optimizer_step(st, theta, {0.0, 0.0}, sgd);
  CHECK(theta[0] == doctest::Approx(0.0));
  ranker::TrainConfig adam;
  adam.optimizer = ranker::OptimizerKind::Adam;
  ranker::OptimizerState st2;
  std::vector<double> theta2 = {0.5, -0.5};
  ranker::optimizer_step(st2, theta2, {0.0, 0.0}, adam);
  CHECK(theta2[0] == 0.5);
  CHECK(theta2[1] == -0.5);

  // Adam first step: theta0 decreases by ~lr * sign(g)
  // bias-corrected: m_hat = g, v_hat = g^2 -> update = lr * g/(|g| + eps)
  for (double g : {3.0, -0.25}) {
    ranker::OptimizerState st3;
    std::vector<double> theta3 = {0.0, 0.0};
    ranker::optimizer_step(st3, theta3, {g, 0.0}, adam);
    const double expected = -adam.adam.learning_rate * g /
                            (std::abs(g) + adam.adam.epsilon);
    CHECK(theta3[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(theta3[1] == 0.0);
  }
}

TEST_CASE("train: planted monotone feature earns positive weight") {
  Rng rng(47);
  FeaturizedTrips trips;
  for (int i = 0; i < 3; ++i) {
    std::vector<FeatureVector> trip;
    for (int t = 0; t < 200; ++t)
      trip.push_back(fv(t, {0.01 * t + 0.1 * rng.normal(), rng.normal()}));
    trips.push_back(std::move(trip));
  }
  ranker::TrainConfig cfg;
  cfg.iterations = 20000;
  cfg.seed = 7;
  cfg.loss_report_every = 5000;
  auto result = ranker::train(trips, cfg, 1e-4, {"ramp", "noise"});
  CHECK(result.model.theta[0] > 0.0);
  CHECK(std::abs(result.model.theta[0]) > std::abs(result.model.theta[1]));
  CHECK(result.log.front().step == 0);
  CHECK(result.log.front().loss == doctest::Approx(1.0));
  CHECK(result.log.back().loss < result.log.front().loss);
}

TEST_CASE("train: iteration contract and determinism") {
  FeaturizedTrips trips = {{fv(0, {0.0}), fv(1, {1.0})}};
  ranker::TrainConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(ranker::train(trips, cfg, 0.0), ranker::Error);

  cfg.iterations = 1;
  cfg.optimizer = ranker::OptimizerKind::Sgd;
  cfg.sgd = {0.5, 0.0};
  cfg.loss_report_every = 0;
  auto one = ranker::train(trips, cfg, 0.0);
  // exactly one update: hinge active at theta=0, gradient = -(x_t - x_u)
  CHECK(one.model.theta[0] == doctest::Approx(0.5));

  cfg.iterations = 5000;
  cfg.seed = 1234;
  auto a = ranker::train(trips, cfg, 1e-3);
  auto b = ranker::train(trips, cfg, 1e-3);
  for (std::size_t i = 0; i < a.model.theta.size(); ++i)
    CHECK(a.model.theta[i] == b.model.theta[i]);  // bit-identical
}

TEST_CASE("positive scaling of theta preserves score ordering") {
  Rng rng(48);
  auto m = model_of({rng.normal(), rng.normal(), rng.normal()});
  auto scaled = m;
  for (auto& v : scaled.theta) v *= 3.7;
  std::vector<FeatureVector> samples;
  for (int i = 0; i < 50; ++i)
    samples.push_back(fv(i, {rng.normal(), rng.normal(), rng.normal()}));
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const bool base = ranker::score(m, samples[i]) < ranker::score(m, samples[j]);
      const bool two = ranker::score(scaled, samples[i]) < ranker::score(scaled, samples[j]);
      CHECK(base == two);
    }
}

TEST_CASE("report_weights ordering") {
  LinearModel m;
  m.theta = {0.073, -0.047, 0.0};
  m.feature_names = {"X-jerk", "Y-acceleration", "speed"};
  auto ranked = ranker::report_weights(m);
  CHECK(ranked[0].first == "X-jerk");
  CHECK(ranked[1].first == "Y-acceleration");
  CHECK(ranked[2].first == "speed");

  m.theta = {0.0, 0.0, 0.0};
  ranked = ranker::report_weights(m);
  CHECK(ranked[0].first == "X-jerk");  // alphabetical among ties
  CHECK(ranked[1].first == "Y-acceleration");
  CHECK(ranked[2].first == "speed");

  m.theta = {1.0, -5.0};
  m.feature_names = {"a", "b"};
  ranked = ranker::report_weights(m);
  CHECK(ranked[0].first == "b");
}

TEST_CASE("model file round-trips at full precision") {
  LinearModel m;
  m.theta = {0.1234567890123456789, -3.0e-17, 42.0};
  m.lambda = 1e-4;
  m.feature_names = {"X-jerk", "Speed", "Anomaly-X-acceleration"};
  auto path = std::filesystem::temp_directory_path() / "drowsyrank_model_test.txt";
  ranker::save_model(m, path);
  auto back = ranker::load_model(path);
  CHECK(back.lambda == m.lambda);
  REQUIRE(back.theta.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.theta[i] == m.theta[i]);
    CHECK(back.feature_names[i] == m.feature_names[i]);
  }
}
