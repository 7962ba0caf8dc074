#pragma once

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"
#include "hithar/signal/channels.hpp"

namespace hithar::io {

/// Raw six-axis stream as read from disk.
struct ImuStream {
  Eigen::MatrixXd acc;   // 3 x T, g
  Eigen::MatrixXd gyro;  // 3 x T, rad/s
  double sample_rate = signal::kSampleRateHz;
};

namespace detail {
inline double parse_double(std::string_view field, std::size_t line, int col) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size() || !std::isfinite(v))
    throw InputError("imu csv line " + std::to_string(line) + ", column " + std::to_string(col) + ": bad number '" +
                     std::string(field) + "'");
  return v;
}
}  // namespace detail

/// Columns t, ax, ay, az, gx, gy, gz with a header row. Timestamps must be
/// increasing and evenly spaced to within 1% of the median step.
inline ImuStream read_imu_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("imu csv: empty file");
  {
    std::string header;
    for (char c : line)
      if (c != ' ' && c != '\r') header.push_back(c);
    if (header != "t,ax,ay,az,gx,gy,gz") throw InputError("imu csv: expected header t,ax,ay,az,gx,gy,gz");
  }
  std::vector<std::array<double, 7>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::array<double, 7> r{};
    std::size_t pos = 0;
    for (int c = 0; c < 7; ++c) {
      const auto comma = line.find(',', pos);
      if ((c < 6) == (comma == std::string::npos))
        throw InputError("imu csv line " + std::to_string(lineno) + ": expected 7 columns");
      r[static_cast<std::size_t>(c)] =
          detail::parse_double(std::string_view(line).substr(pos, comma == std::string::npos ? std::string::npos
                                                                                            : comma - pos),
                               lineno, c);
      pos = comma + 1;
    }
    rows.push_back(r);
  }
  if (rows.size() < 2) throw InputError("imu csv: need at least two samples");
  std::vector<double> dt;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double d = rows[i][0] - rows[i - 1][0];
    if (!(d > 0.0)) throw InputError("imu csv: timestamps must increase (line " + std::to_string(i + 2) + ")");
    dt.push_back(d);
  }
  std::vector<double> sorted = dt;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double med = sorted[sorted.size() / 2];
  for (std::size_t i = 0; i < dt.size(); ++i)
    if (std::abs(dt[i] - med) > 0.01 * med)
      throw InputError("imu csv: uneven sampling at line " + std::to_string(i + 3));
  ImuStream s;
  s.sample_rate = 1.0 / med;
  const auto n = static_cast<Eigen::Index>(rows.size());
  s.acc.resize(3, n);
  s.gyro.resize(3, n);
  for (Eigen::Index t = 0; t < n; ++t)
    for (int c = 0; c < 3; ++c) {
      s.acc(c, t) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(1 + c)];
      s.gyro(c, t) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(4 + c)];
    }
  return s;
}

/// Writes rows 0-5 of the channel matrix. Values use 9 significant digits.
inline void write_imu_csv(std::ostream& out, const signal::ChannelizedSequence& seq) {
  out << "t,ax,ay,az,gx,gy,gz\n";
  char buf[256];
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    const auto& c = seq.channels;
    std::snprintf(buf, sizeof(buf), "%.4f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", static_cast<double>(t) / seq.sample_rate,
                  c(0, t), c(1, t), c(2, t), c(3, t), c(4, t), c(5, t));
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Label spans

struct LabelRecord {
  std::string video_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Action action = Action::Stationary;
  double weight = 1.0;
  Scenario scenario = Scenario::Cooking;
};

inline json to_json(const LabelRecord& r) {
  return json{{"video_id", r.video_id},
              {"start_s", r.start_s},
              {"end_s", r.end_s},
              {"action", std::string(to_string(r.action))},
              {"weight", r.weight},
              {"scenario", std::string(to_string(r.scenario))}};
}

inline LabelRecord label_from_json(const json& j) {
  LabelRecord r;
  std::string action, scenario;
  StrictReader rd(j, "label");
  rd.get("video_id", r.video_id)
      .get("start_s", r.start_s)
      .get("end_s", r.end_s)
      .get("action", action)
      .get("weight", r.weight)
      .get("scenario", scenario);
  rd.finish();
  if (r.video_id.empty()) throw InputError("label: missing video_id");
  if (!(r.end_s > r.start_s) || r.start_s < 0.0)
    throw InputError("label for " + r.video_id + ": need 0 <= start_s < end_s");
  if (!(r.weight >= 0.0 && r.weight <= 1.0)) throw InputError("label for " + r.video_id + ": weight outside [0,1]");
  auto a = parse_action(action);
  if (!a) throw InputError("label for " + r.video_id + ": unknown action '" + action + "'");
  auto s = parse_scenario(scenario);
  if (!s) throw InputError("label for " + r.video_id + ": unknown scenario '" + scenario + "'");
  r.action = *a;
  r.scenario = *s;
  return r;
}

inline std::vector<LabelRecord> read_labels(std::istream& in) {
  std::vector<LabelRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(label_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError("labels line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw InputError("labels line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_labels(std::ostream& out, const std::vector<LabelRecord>& labels) {
  for (const auto& l : labels) out << to_json(l).dump() << "\n";
}

/// Label records of a sequence, one per span, times in seconds.
inline std::vector<LabelRecord> labels_of(const signal::ChannelizedSequence& seq) {
  std::vector<LabelRecord> out;
  for (const auto& s : seq.spans)
    out.push_back({seq.video_id, static_cast<double>(s.start) / seq.sample_rate,
                   static_cast<double>(s.end) / seq.sample_rate, s.action, s.weight, seq.scenario});
  return out;
}

inline signal::ActionSpan to_span(const LabelRecord& r, double sample_rate) {
  signal::ActionSpan s;
  s.start = static_cast<std::int64_t>(std::llround(r.start_s * sample_rate));
  s.end = static_cast<std::int64_t>(std::llround(r.end_s * sample_rate));
  s.action = r.action;
  s.weight = r.weight;
  return s;
}

}  // namespace hithar::io
