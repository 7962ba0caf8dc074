#pragma once

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>

#include "hithar/core/errors.hpp"
#include "hithar/core/rng.hpp"

namespace hithar::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    check();
  }
  void bytes(std::string_view s) {
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    check();
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    bytes(s);
  }
  template <typename T>
  void matrix(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(T) * m.size()));
    check();
  }

 private:
  void check() {
    if (!out_) throw IoError("write failed");
  }
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  std::string str(std::uint64_t max_len = std::uint64_t{1} << 32) {
    const auto n = pod<std::uint64_t>();
    if (n > max_len) throw IoError(context_ + ": string length " + std::to_string(n) + " is implausible");
    return bytes(static_cast<std::size_t>(n));
  }
  template <typename T>
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> matrix() {
    const auto rows = pod<std::int64_t>();
    const auto cols = pod<std::int64_t>();
    if (rows < 0 || cols < 0 || (rows > 0 && cols > (std::int64_t{1} << 40) / rows))
      throw IoError(context_ + ": bad matrix shape");
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
    in_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(T) * m.size()));
    check();
    return m;
  }
  const std::string& context() const { return context_; }

 private:
  void check() {
    if (!in_) throw IoError(context_ + ": truncated file");
  }
  std::istream& in_;
  std::string context_;
};

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
  std::ifstream f(p, binary ? std::ios::binary : std::ios::in);
  if (!f) throw IoError("cannot open " + p.string());
  return f;
}

inline std::string read_file(const std::filesystem::path& p) {
  auto f = open_in(p, true);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
  auto f = open_out(p, true);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("write failed: " + p.string());
}

/// Hex FNV-1a digest of a byte string; used for checksums in manifests.
inline std::string digest(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

}  // namespace hithar::io
