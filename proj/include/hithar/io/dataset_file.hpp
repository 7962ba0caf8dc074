#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hithar/io/binary.hpp"
#include "hithar/signal/channels.hpp"
#include "hithar/signal/dataset.hpp"

namespace hithar::io {

inline constexpr char kDatasetMagic[4] = {'H', 'H', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

/// Prepared corpus: raw channel streams with their labels, the video split
/// and normalization statistics computed on the training videos.
struct PreparedDataset {
  std::vector<signal::ChannelizedSequence> videos;
  signal::VideoSplit split;
  signal::NormStats stats;

  std::vector<signal::ChannelizedSequence> subset(const std::vector<std::string>& ids) const {
    return signal::select_videos(videos, ids);
  }
};

namespace detail {
inline void write_ids(BinaryWriter& w, const std::vector<std::string>& ids) {
  w.pod<std::uint64_t>(ids.size());
  for (const auto& s : ids) w.str(s);
}
inline std::vector<std::string> read_ids(BinaryReader& r) {
  const auto n = r.pod<std::uint64_t>();
  if (n > (1u << 24)) throw IoError(r.context() + ": implausible id count");
  std::vector<std::string> ids;
  for (std::uint64_t i = 0; i < n; ++i) ids.push_back(r.str(1 << 16));
  return ids;
}
}  // namespace detail

inline void write_dataset(std::ostream& out, const PreparedDataset& d) {
  BinaryWriter w(out);
  w.bytes(std::string_view(kDatasetMagic, 4));
  w.pod<std::uint32_t>(kDatasetVersion);
  w.matrix<double>(d.stats.mean);
  w.matrix<double>(d.stats.std);
  detail::write_ids(w, d.split.train);
  detail::write_ids(w, d.split.val);
  detail::write_ids(w, d.split.test);
  w.pod<std::uint64_t>(d.videos.size());
  for (const auto& v : d.videos) {
    w.str(v.video_id);
    w.pod<std::int32_t>(index(v.scenario));
    w.pod<double>(v.sample_rate);
    w.matrix<double>(v.channels);
    w.pod<std::uint64_t>(v.spans.size());
    for (const auto& s : v.spans) {
      w.pod<std::int64_t>(s.start);
      w.pod<std::int64_t>(s.end);
      w.pod<std::int32_t>(index(s.action));
      w.pod<double>(s.weight);
    }
  }
}

inline PreparedDataset read_dataset(std::istream& in, const std::string& context = "dataset") {
  BinaryReader r(in, context);
  if (r.bytes(4) != std::string_view(kDatasetMagic, 4)) throw IoError(context + ": not a prepared dataset file");
  if (const auto v = r.pod<std::uint32_t>(); v != kDatasetVersion)
    throw IoError(context + ": unsupported dataset version " + std::to_string(v));
  PreparedDataset d;
  const auto mean = r.matrix<double>();
  const auto sd = r.matrix<double>();
  if (mean.rows() != signal::kNumChannels || mean.cols() != 1 || sd.rows() != signal::kNumChannels || sd.cols() != 1)
    throw IoError(context + ": bad normalization statistics");
  d.stats.mean = mean;
  d.stats.std = sd;
  d.split.train = detail::read_ids(r);
  d.split.val = detail::read_ids(r);
  d.split.test = detail::read_ids(r);
  const auto n = r.pod<std::uint64_t>();
  if (n > (1u << 24)) throw IoError(context + ": implausible video count");
  for (std::uint64_t i = 0; i < n; ++i) {
    signal::ChannelizedSequence v;
    v.video_id = r.str(1 << 16);
    const auto sc = r.pod<std::int32_t>();
    if (sc < 0 || sc >= kNumScenarios) throw IoError(context + ": bad scenario index");
    v.scenario = static_cast<Scenario>(sc);
    v.sample_rate = r.pod<double>();
    v.channels = r.matrix<double>();
    if (v.channels.rows() != signal::kNumChannels) throw IoError(context + ": video " + v.video_id + " is not 8-channel");
    const auto ns = r.pod<std::uint64_t>();
    if (ns > static_cast<std::uint64_t>(v.channels.cols()) + 1) throw IoError(context + ": implausible span count");
    for (std::uint64_t k = 0; k < ns; ++k) {
      signal::ActionSpan s;
      s.start = r.pod<std::int64_t>();
      s.end = r.pod<std::int64_t>();
      const auto a = r.pod<std::int32_t>();
      if (a < 0 || a >= kNumActions) throw IoError(context + ": bad action index");
      s.action = static_cast<Action>(a);
      s.weight = r.pod<double>();
      v.spans.push_back(s);
    }
    d.videos.push_back(std::move(v));
  }
  signal::check_disjoint(d.split);
  return d;
}

inline void save_dataset(const std::filesystem::path& p, const PreparedDataset& d) {
  auto f = open_out(p, true);
  write_dataset(f, d);
}

inline PreparedDataset load_dataset(const std::filesystem::path& p) {
  auto f = open_in(p, true);
  return read_dataset(f, p.string());
}

}  // namespace hithar::io
