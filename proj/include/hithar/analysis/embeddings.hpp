#pragma once

#include <cstdio>
#include <span>
#include <string>

#include "hithar/model/hithar_model.hpp"
#include "hithar/training/trainer.hpp"

namespace hithar::analysis {

namespace detail {
inline void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}
}  // namespace detail

/// CSV with one row per window (kind "window": e_* and h_* filled) plus one
/// row per sequence for the CLS token (kind "cls": h_* holds h_cls, e_* empty).
template <typename T>
std::string export_embeddings(const model::HiTHAR<T>& net, const model::ParamStore<T>& params,
                              std::span<const signal::SequenceSample> data, int threads = 1) {
  const auto outputs = training::predict(net, params, data, threads);
  const int d = net.config().embed_dim;
  std::string csv = "video_id,sequence,window_index,kind,scenario,action,weight,gate";
  for (int i = 0; i < d; ++i) csv += ",e_" + std::to_string(i);
  for (int i = 0; i < d; ++i) csv += ",h_" + std::to_string(i);
  csv += "\n";
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto& sample = data[s];
    const auto& out = outputs[s];
    const std::string prefix = sample.video_id + "," + std::to_string(s) + ",";
    for (std::size_t t = 0; t < sample.windows.size(); ++t) {
      const auto& w = sample.windows[t];
      const auto col = static_cast<Eigen::Index>(t);
      csv += prefix + std::to_string(t) + ",window," + std::string(to_string(sample.scenario)) + ",";
      csv += w.action ? std::string(to_string(*w.action)) : std::string();
      csv += ",";
      detail::append_number(csv, w.weight);
      csv += ",";
      detail::append_number(csv, static_cast<double>(out.gates(col)));
      for (int i = 0; i < d; ++i) {
        csv += ",";
        detail::append_number(csv, static_cast<double>(out.e(i, col)));
      }
      for (int i = 0; i < d; ++i) {
        csv += ",";
        detail::append_number(csv, static_cast<double>(out.h(i, col)));
      }
      csv += "\n";
    }
    csv += prefix + "-1,cls," + std::string(to_string(sample.scenario)) + ",,,";
    for (int i = 0; i < d; ++i) csv += ",";
    for (int i = 0; i < d; ++i) {
      csv += ",";
      detail::append_number(csv, static_cast<double>(out.h_cls(i, 0)));
    }
    csv += "\n";
  }
  return csv;
}

}  // namespace hithar::analysis
