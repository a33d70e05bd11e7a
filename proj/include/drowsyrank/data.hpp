#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "drowsyrank/text.hpp"

namespace drowsyrank::data {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedRow : Error {
  using Error::Error;
};
struct NonMonotoneTime : Error {
  using Error::Error;
};
struct EmptyTrip : Error {
  using Error::Error;
};
struct MissingFile : Error {
  using Error::Error;
};
struct DuplicateTripId : Error {
  using Error::Error;
};
struct UnknownLabelToken : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

struct SensorFrame {
  double t = 0.0;       // seconds, monotone within a trip
  double ax = 0.0;      // longitudinal acceleration, m/s^2
  double ay = 0.0;      // lateral acceleration, m/s^2
  double az = 0.0;      // vertical acceleration, m/s^2
  double speed = 0.0;   // m/s, >= 0
  double direction = 0.0;  // heading in degrees, [0, 360)
};

enum class TripLabel { Drowsy, Normal };

inline const char* label_name(TripLabel l) {
  return l == TripLabel::Drowsy ? "drowsy" : "normal";
}

struct Trip {
  std::string id;
  TripLabel label = TripLabel::Normal;
  std::vector<SensorFrame> frames;
  // Per-frame binary ground truth, present only for synthetic data.
  std::optional<std::vector<int>> truth;
};

struct Dataset {
  std::vector<Trip> trips;
  std::size_t n_drowsy = 0;
  std::size_t n_normal = 0;
};

struct Violation {
  std::size_t frame;  // offending frame index (or size() for trip-level rules)
  std::string rule;
};

inline std::vector<Violation> validate_trip(const Trip& trip) {
  std::vector<Violation> out;
  if (trip.frames.empty()) {
    out.push_back({0, "frames non-empty"});
    return out;
  }
  for (std::size_t i = 0; i < trip.frames.size(); ++i) {
    const SensorFrame& f = trip.frames[i];
    const double vals[] = {f.t, f.ax, f.ay, f.az, f.speed, f.direction};
    for (double v : vals) {
      if (!std::isfinite(v)) {
        out.push_back({i, "all values finite"});
        break;
      }
    }
    if (f.speed < 0.0) out.push_back({i, "speed >= 0"});
    if (!(f.direction >= 0.0 && f.direction < 360.0))
      out.push_back({i, "direction in [0,360)"});
    if (i > 0 && !(f.t > trip.frames[i - 1].t))
      out.push_back({i, "timestamps strictly increasing"});
  }
  if (trip.truth && trip.truth->size() != trip.frames.size())
    out.push_back({trip.frames.size(), "truth has one entry per frame"});
  return out;
}

inline constexpr const char* kTripCsvHeader = "t,ax,ay,az,speed,direction";
inline constexpr const char* kTripCsvHeaderTruth = "t,ax,ay,az,speed,direction,truth";

inline Trip parse_trip_csv(const std::filesystem::path& path, TripLabel label) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open trip file: " + path.string());

  Trip trip;
  trip.id = path.stem().string();
  trip.label = label;

  std::string line;
  if (!std::getline(in, line)) throw EmptyTrip("empty trip file: " + path.string());
  std::string_view header = trim(line);
  bool has_truth = false;
  if (header == kTripCsvHeaderTruth) {
    has_truth = true;
    trip.truth.emplace();
  } else if (header != kTripCsvHeader) {
    throw MalformedRow("unexpected header in " + path.string() + ": " + std::string(header));
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = trim(line);
    if (body.empty()) continue;
    auto fields = split_csv(body);
    const std::size_t want = has_truth ? 7u : 6u;
    if (fields.size() != want)
      throw MalformedRow(path.string() + ":" + std::to_string(lineno) +
                         ": expected " + std::to_string(want) + " columns, got " +
                         std::to_string(fields.size()));
    double v[7] = {0, 0, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < want; ++i) {
      if (!parse_double(fields[i], v[i]))
        throw MalformedRow(path.string() + ":" + std::to_string(lineno) +
                           ": non-numeric field '" + std::string(fields[i]) + "'");
    }
    SensorFrame f{v[0], v[1], v[2], v[3], v[4], v[5]};
    if (!trip.frames.empty() && !(f.t > trip.frames.back().t))
      throw NonMonotoneTime(path.string() + ":" + std::to_string(lineno) +
                            ": timestamp " + format_double(f.t) +
                            " not greater than previous");
    trip.frames.push_back(f);
    if (has_truth) trip.truth->push_back(v[6] != 0.0 ? 1 : 0);
  }
  if (trip.frames.empty()) throw EmptyTrip("no data rows in " + path.string());
  return trip;
}

inline void write_trip_csv(const Trip& trip, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trip file: " + path.string());
  const bool has_truth = trip.truth.has_value();
  out << (has_truth ? kTripCsvHeaderTruth : kTripCsvHeader) << '\n';
  for (std::size_t i = 0; i < trip.frames.size(); ++i) {
    const SensorFrame& f = trip.frames[i];
    out << format_double(f.t) << ',' << format_double(f.ax) << ','
        << format_double(f.ay) << ',' << format_double(f.az) << ','
        << format_double(f.speed) << ',' << format_double(f.direction);
    if (has_truth) out << ',' << (*trip.truth)[i];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// Manifest: one "<relative-path>,<drowsy|normal>" per line, '#' comments.
inline Dataset parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open manifest: " + path.string());
  const std::filesystem::path base = path.parent_path();

  Dataset ds;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = split_csv(body);
    if (fields.size() != 2)
      throw MalformedRow(path.string() + ":" + std::to_string(lineno) +
                         ": expected '<path>,<label>'");
    std::string_view tok = trim(fields[1]);
    TripLabel label;
    if (tok == "drowsy")
      label = TripLabel::Drowsy;
    else if (tok == "normal")
      label = TripLabel::Normal;
    else
      throw UnknownLabelToken(path.string() + ":" + std::to_string(lineno) +
                              ": unknown label '" + std::string(tok) + "'");
    std::filesystem::path trip_path = base / std::string(trim(fields[0]));
    if (!std::filesystem::exists(trip_path))
      throw MissingFile("manifest references missing file: " + trip_path.string());
    Trip trip = parse_trip_csv(trip_path, label);
    if (!seen.insert(trip.id).second)
      throw DuplicateTripId("duplicate trip id: " + trip.id);
    if (label == TripLabel::Drowsy)
      ++ds.n_drowsy;
    else
      ++ds.n_normal;
    ds.trips.push_back(std::move(trip));
  }
  return ds;
}

}  // namespace drowsyrank::data
