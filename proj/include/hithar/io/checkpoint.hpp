#pragma once

#include <filesystem>
#include <string>

#include "hithar/core/json.hpp"
#include "hithar/io/binary.hpp"
#include "hithar/model/config.hpp"
#include "hithar/model/hithar_model.hpp"
#include "hithar/model/params.hpp"

namespace hithar::io {

inline constexpr char kCheckpointMagic[8] = {'H', 'I', 'T', 'H', 'A', 'R', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to evaluate or resume: the run config (its "model"
/// section rebuilds the layout), weights, EMA shadow and RNG state.
template <typename T>
struct Checkpoint {
  json config;
  model::ParamStore<T> params;
  model::ParamStore<T> ema;
  std::string rng_state;
};

namespace detail {
template <typename T>
void write_store(BinaryWriter& w, const model::ParamStore<T>& p) {
  w.pod<std::uint64_t>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    w.str(p.spec(i).name);
    w.matrix<T>(p[i]);
  }
}

template <typename T>
model::ParamStore<T> read_store(BinaryReader& r, const std::shared_ptr<const model::Layout>& layout) {
  model::ParamStore<T> p(layout);
  const auto n = r.pod<std::uint64_t>();
  if (n != p.size())
    throw IoError(r.context() + ": checkpoint has " + std::to_string(n) + " tensors, model expects " +
                  std::to_string(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto name = r.str(1 << 12);
    if (name != p.spec(i).name)
      throw IoError(r.context() + ": tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                    p.spec(i).name + "'");
    auto m = r.template matrix<T>();
    if (m.rows() != p[i].rows() || m.cols() != p[i].cols())
      throw IoError(r.context() + ": shape mismatch for " + name);
    p[i] = std::move(m);
  }
  return p;
}
}  // namespace detail

template <typename T>
void write_checkpoint(std::ostream& out, const Checkpoint<T>& ck) {
  BinaryWriter w(out);
  w.bytes(std::string_view(kCheckpointMagic, 8));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(ck.config.dump());
  w.pod<std::uint32_t>(sizeof(T));
  detail::write_store(w, ck.params);
  detail::write_store(w, ck.ema);
  w.str(ck.rng_state);
}

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& in, const std::string& context = "checkpoint") {
  BinaryReader r(in, context);
  if (r.bytes(8) != std::string_view(kCheckpointMagic, 8)) throw IoError(context + ": not a checkpoint file");
  if (const auto v = r.pod<std::uint32_t>(); v != kCheckpointVersion)
    throw IoError(context + ": unsupported checkpoint version " + std::to_string(v));
  Checkpoint<T> ck;
  try {
    ck.config = json::parse(r.str(1 << 24));
  } catch (const json::exception& e) {
    throw IoError(context + ": corrupt config block: " + e.what());
  }
  if (const auto dsize = r.pod<std::uint32_t>(); dsize != sizeof(T))
    throw IoError(context + ": stored scalar size " + std::to_string(dsize) + " does not match the requested type");
  if (!ck.config.contains("model")) throw IoError(context + ": config block has no model section");
  const model::HiTHAR<T> net(model::model_config_from_json(ck.config.at("model")));
  ck.params = detail::read_store<T>(r, net.layout());
  ck.ema = detail::read_store<T>(r, net.layout());
  ck.rng_state = r.str(1 << 20);
  return ck;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& p, const Checkpoint<T>& ck) {
  auto f = open_out(p, true);
  write_checkpoint(f, ck);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw IoError("checkpoint not found: " + p.string());
  auto f = open_in(p, true);
  return read_checkpoint<T>(f, p.string());
}

}  // namespace hithar::io
