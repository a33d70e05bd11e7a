#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "drowsyrank/data.hpp"
#include "drowsyrank/rng.hpp"
#include "drowsyrank/text.hpp"

namespace drowsyrank::synth {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OuParams {
  double rate = 0.1;  // mean-reversion per second
  double vol = 0.1;   // per-step noise scale
};

// Synthetic trips at 1 Hz with a planted monotone drowsiness latent.
// Drowsy trips ramp d(tau) linearly from 0 to drift_amplitude; all injected
// drowsiness effects scale with d. Normal trips have d == 0 throughout.
// Road bumps and occasional lane-sway corrections are part of the base
// traffic model and appear in trips of both labels, so an unsupervised
// anomaly detector also fires on drowsiness-irrelevant events.
struct SynthConfig {
  int n_drowsy = 12;
  int n_normal = 90;
  int trip_len_min = 600;   // seconds (frames at 1 Hz)
  int trip_len_max = 1800;
  std::uint64_t seed = 42;

  double drift_amplitude = 1.0;   // peak latent drowsiness
  double swerve_rate_max = 2.0;   // extra swerve events/min at d = 1
  double truth_threshold = 0.5;   // latent level marking drowsy timestamps

  // base channel dynamics
  double speed_mean = 15.0;              // m/s
  OuParams speed_ou{0.02, 0.15};
  double drowsy_speed_offset = -0.5;     // trip-level cruise offset when drowsy
  OuParams ay_ou{0.5, 0.12};
  double az_mean = 9.8;
  OuParams az_ou{0.8, 0.35};
  double heading_walk_sd = 0.3;          // deg per second

  // longitudinal (ax) composition
  double ax_bias_sd = 5.0;               // per-trip constant sensor/grade offset
  OuParams ax_ou{5e-4, 0.0003};           // slow wander
  double jerk_noise_sd = 0.0008;          // white component, scaled by (1 + 2d)
  // Throttle-correction bias: the mean of X-jerk tracks d relative to its
  // trip average (speed holding keeps net acceleration near zero), so the
  // drowsiness signal lives in the derivative, not in the ax level.
  double ax_drift_rate = 0.02;           // jerk-mean span at d = 1, m/s^3

  // events (per-minute rates)
  double bump_rate = 0.5;                // az road bumps, all trips
  double bump_amp_min = 2.0, bump_amp_max = 5.0;
  double base_sway_rate = 0.2;           // ay correction pulses, all trips
  double swerve_amp_min = 0.8, swerve_amp_max = 1.8;
  double swerve_heading_sd = 2.0;        // deg, during a swerve

  void check() const {
    if (n_drowsy < 0 || n_normal < 0) throw Error("counts must be >= 0");
    if (trip_len_min < 2 || trip_len_min > trip_len_max)
      throw Error("invalid trip length range");
    if (drift_amplitude < 0.0) throw Error("drift_amplitude must be >= 0");
    if (!(truth_threshold > 0.0 && truth_threshold < 1.0))
      throw Error("truth_threshold must be in (0,1)");
  }
};

inline double wrap_heading(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w;
}

inline data::Trip generate_trip(Rng& rng, data::TripLabel label,
                                const SynthConfig& config, std::string id = "trip") {
  config.check();
  const int len =
      config.trip_len_min +
      static_cast<int>(rng.uniform_index(
          static_cast<std::size_t>(config.trip_len_max - config.trip_len_min + 1)));
  const bool drowsy = label == data::TripLabel::Drowsy;

  data::Trip trip;
  trip.id = std::move(id);
  trip.label = label;
  trip.truth.emplace();
  trip.frames.reserve(static_cast<std::size_t>(len));

  const double speed_target =
      config.speed_mean + (drowsy ? config.drowsy_speed_offset : 0.0);
  auto stationary_sd = [](const OuParams& p) {
    return p.vol / std::sqrt(std::max(2.0 * p.rate, 1e-12));
  };

  double speed = speed_target + rng.normal() * stationary_sd(config.speed_ou);
  double heading = rng.uniform(0.0, 360.0);
  double ay = rng.normal() * stationary_sd(config.ay_ou);
  double az_dev = rng.normal() * stationary_sd(config.az_ou);
  const double ax_bias = rng.normal() * config.ax_bias_sd;
  double ax_slow = 0.0;
  double ax_trend = 0.0;

  int swerve_remaining = 0;
  int swerve_len = 0;
  double swerve_amp = 0.0;

  for (int tau = 0; tau < len; ++tau) {
    const double d =
        drowsy && len > 1
            ? config.drift_amplitude * static_cast<double>(tau) /
                  static_cast<double>(len - 1)
            : 0.0;

    // OU updates (dt = 1 s)
    speed += config.speed_ou.rate * (speed_target - speed) +
             config.speed_ou.vol * rng.normal();
    ay += -config.ay_ou.rate * ay + config.ay_ou.vol * rng.normal();
    az_dev += -config.az_ou.rate * az_dev + config.az_ou.vol * rng.normal();
    ax_slow += -config.ax_ou.rate * ax_slow + config.ax_ou.vol * rng.normal();
    // jerk-mean bias r*(d - d_bar); zero-mean over the trip, so the ax level
    // stays bounded while E[jerk] increases with d
    const double d_bar = drowsy ? 0.5 * config.drift_amplitude : 0.0;
    ax_trend += config.ax_drift_rate * (d - d_bar);
    heading = wrap_heading(heading + config.heading_walk_sd * rng.normal());

    // road bumps (both labels)
    double az_event = 0.0;
    if (rng.bernoulli(config.bump_rate / 60.0)) {
      const double amp = rng.uniform(config.bump_amp_min, config.bump_amp_max);
      az_event = rng.bernoulli(0.5) ? amp : -amp;
    }

    // sway/swerve pulses: base rate for everyone, plus a d-scaled extra rate
    const double swerve_rate =
        (config.base_sway_rate + d * config.swerve_rate_max) / 60.0;
    if (swerve_remaining == 0 && rng.bernoulli(swerve_rate)) {
      swerve_len = 3;
      swerve_remaining = swerve_len;
      swerve_amp = rng.uniform(config.swerve_amp_min, config.swerve_amp_max) *
                   (rng.bernoulli(0.5) ? 1.0 : -1.0);
    }
    double ay_event = 0.0;
    if (swerve_remaining > 0) {
      const double phase =
          static_cast<double>(swerve_len - swerve_remaining) / swerve_len;
      ay_event = swerve_amp * std::sin(3.14159265358979323846 * phase);
      heading = wrap_heading(heading + config.swerve_heading_sd * rng.normal());
      --swerve_remaining;
    }

    const double jerk_white =
        config.jerk_noise_sd * (1.0 + 2.0 * d) * rng.normal();

    data::SensorFrame f;
    f.t = static_cast<double>(tau);
    f.ax = ax_bias + ax_slow + ax_trend + jerk_white;
    f.ay = ay + ay_event;
    f.az = config.az_mean + az_dev + az_event;
    f.speed = std::max(0.0, speed);
    f.direction = heading;
    trip.frames.push_back(f);
    trip.truth->push_back(d >= config.truth_threshold ? 1 : 0);
  }
  return trip;
}

inline void write_config_echo(const SynthConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data::IoError("cannot write " + path.string());
  out << "n_drowsy=" << c.n_drowsy << "\nn_normal=" << c.n_normal
      << "\ntrip_len_min=" << c.trip_len_min << "\ntrip_len_max=" << c.trip_len_max
      << "\nseed=" << c.seed
      << "\ndrift_amplitude=" << format_double(c.drift_amplitude)
      << "\nswerve_rate_max=" << format_double(c.swerve_rate_max)
      << "\ntruth_threshold=" << format_double(c.truth_threshold)
      << "\nspeed_mean=" << format_double(c.speed_mean)
      << "\nspeed_ou.rate=" << format_double(c.speed_ou.rate)
      << "\nspeed_ou.vol=" << format_double(c.speed_ou.vol)
      << "\ndrowsy_speed_offset=" << format_double(c.drowsy_speed_offset)
      << "\nay_ou.rate=" << format_double(c.ay_ou.rate)
      << "\nay_ou.vol=" << format_double(c.ay_ou.vol)
      << "\naz_mean=" << format_double(c.az_mean)
      << "\naz_ou.rate=" << format_double(c.az_ou.rate)
      << "\naz_ou.vol=" << format_double(c.az_ou.vol)
      << "\nheading_walk_sd=" << format_double(c.heading_walk_sd)
      << "\nax_bias_sd=" << format_double(c.ax_bias_sd)
      << "\nax_ou.rate=" << format_double(c.ax_ou.rate)
      << "\nax_ou.vol=" << format_double(c.ax_ou.vol)
      << "\njerk_noise_sd=" << format_double(c.jerk_noise_sd)
      << "\nax_drift_rate=" << format_double(c.ax_drift_rate)
      << "\nbump_rate=" << format_double(c.bump_rate)
      << "\nbump_amp_min=" << format_double(c.bump_amp_min)
      << "\nbump_amp_max=" << format_double(c.bump_amp_max)
      << "\nbase_sway_rate=" << format_double(c.base_sway_rate)
      << "\nswerve_amp_min=" << format_double(c.swerve_amp_min)
      << "\nswerve_amp_max=" << format_double(c.swerve_amp_max)
      << "\nswerve_heading_sd=" << format_double(c.swerve_heading_sd) << '\n';
}

// Generates the dataset in memory; when out_dir is non-empty, also writes
// trips/, manifest.csv, and a synth-config echo file.
inline data::Dataset generate_dataset(const SynthConfig& config,
                                      const std::filesystem::path& out_dir = {}) {
  config.check();
  Rng master(config.seed);
  data::Dataset ds;

  auto pad3 = [](int i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return std::string(buf);
  };

  std::uint64_t stream = 0;
  for (int i = 0; i < config.n_drowsy; ++i) {
    Rng rng = master.child(++stream);
    ds.trips.push_back(generate_trip(rng, data::TripLabel::Drowsy, config,
                                     "drowsy_" + pad3(i + 1)));
    ++ds.n_drowsy;
  }
  for (int i = 0; i < config.n_normal; ++i) {
    Rng rng = master.child(++stream);
    ds.trips.push_back(generate_trip(rng, data::TripLabel::Normal, config,
                                     "normal_" + pad3(i + 1)));
    ++ds.n_normal;
  }

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "trips");
    std::ofstream manifest(out_dir / "manifest.csv", std::ios::binary);
    if (!manifest) throw data::IoError("cannot write manifest");
    manifest << "# trip file,label\n";
    for (const auto& trip : ds.trips) {
      const std::string rel = "trips/" + trip.id + ".csv";
      data::write_trip_csv(trip, out_dir / rel);
      manifest << rel << ',' << data::label_name(trip.label) << '\n';
    }
    write_config_echo(config, out_dir / "synth-config.txt");
  }
  return ds;
}

}  // namespace drowsyrank::synth
