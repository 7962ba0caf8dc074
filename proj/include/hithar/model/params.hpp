#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hithar/core/errors.hpp"
#include "hithar/core/rng.hpp"

namespace hithar::model {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class InitKind {
  FanInUniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  Zero,
  One,
  Normal002,  // N(0, 0.02^2)
};

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  InitKind init = InitKind::Zero;
  Eigen::Index fan_in = 1;
  bool decay = true;  // subject to weight decay

  Eigen::Index size() const { return rows * cols; }
};

/// Ordered list of named tensors. Built once from a ModelConfig; every
/// ParamStore for that config shares it.
class Layout {
 public:
  std::size_t add(TensorSpec spec) {
    if (index_.count(spec.name)) throw ConfigError("duplicate parameter name " + spec.name);
    index_.emplace(spec.name, specs_.size());
    specs_.push_back(std::move(spec));
    return specs_.size() - 1;
  }
  std::size_t weight(std::string name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    return add({std::move(name), rows, cols, InitKind::FanInUniform, fan_in, true});
  }
  std::size_t bias(std::string name, Eigen::Index rows) {
    return add({std::move(name), rows, 1, InitKind::Zero, 1, false});
  }
  std::size_t norm_scale(std::string name, Eigen::Index rows) {
    return add({std::move(name), rows, 1, InitKind::One, 1, false});
  }
  std::size_t norm_shift(std::string name, Eigen::Index rows) {
    return add({std::move(name), rows, 1, InitKind::Zero, 1, false});
  }
  std::size_t embedding(std::string name, Eigen::Index rows, Eigen::Index cols) {
    return add({std::move(name), rows, cols, InitKind::Normal002, 1, true});
  }

  std::size_t size() const { return specs_.size(); }
  const TensorSpec& operator[](std::size_t i) const { return specs_[i]; }
  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::int64_t scalar_count() const {
    std::int64_t n = 0;
    for (const auto& s : specs_) n += s.size();
    return n;
  }

 private:
  std::vector<TensorSpec> specs_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Named tensor values laid out per a shared Layout. Used for parameters,
/// gradients, optimizer moments and the EMA shadow alike.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::shared_ptr<const Layout> layout) : layout_(std::move(layout)) {
    values_.reserve(layout_->size());
    for (std::size_t i = 0; i < layout_->size(); ++i)
      values_.push_back(Mat<T>::Zero((*layout_)[i].rows, (*layout_)[i].cols));
  }

  Mat<T>& operator[](std::size_t i) { return values_[i]; }
  const Mat<T>& operator[](std::size_t i) const { return values_[i]; }
  Mat<T>& at(std::string_view name) { return values_[require(name)]; }
  const Mat<T>& at(std::string_view name) const { return values_[require(name)]; }

  std::size_t size() const { return values_.size(); }
  const Layout& layout() const { return *layout_; }
  const std::shared_ptr<const Layout>& layout_ptr() const { return layout_; }
  const TensorSpec& spec(std::size_t i) const { return (*layout_)[i]; }
  std::int64_t scalar_count() const { return layout_ ? layout_->scalar_count() : 0; }

  ParamStore zeros_like() const { return ParamStore(layout_); }
  void set_zero() {
    for (auto& v : values_) v.setZero();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(layout_);
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = values_[i].template cast<U>();
    return out;
  }

  ParamStore& operator+=(const ParamStore& other) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  /// Name of the first tensor holding a non-finite value, if any.
  std::optional<std::string> first_non_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!values_[i].allFinite()) return spec(i).name;
    return std::nullopt;
  }

  bool operator==(const ParamStore& other) const {
    if (values_.size() != other.values_.size()) return false;
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i] != other.values_[i]) return false;
    return true;
  }

 private:
  std::size_t require(std::string_view name) const {
    auto id = layout_->find(name);
    if (!id) throw InputError("unknown parameter tensor '" + std::string(name) + "'");
    return *id;
  }

  std::shared_ptr<const Layout> layout_;
  std::vector<Mat<T>> values_;
};

/// Fan-in scaled uniform weights, zero biases, unit norm scales and
/// N(0, 0.02^2) for the CLS token and positional embeddings. Values are drawn
/// in double and rounded, so float and double stores agree up to rounding.
template <typename T>
ParamStore<T> init_params(std::shared_ptr<const Layout> layout, std::uint64_t seed) {
  ParamStore<T> p(layout);
  Rng rng(derive_seed(seed, "init_params"));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const TensorSpec& s = p.spec(i);
    Mat<T>& v = p[i];
    switch (s.init) {
      case InitKind::Zero:
        v.setZero();
        break;
      case InitKind::One:
        v.setOnes();
        break;
      case InitKind::FanInUniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index c = 0; c < v.cols(); ++c)
          for (Eigen::Index r = 0; r < v.rows(); ++r) v(r, c) = static_cast<T>(u(rng));
        break;
      }
      case InitKind::Normal002: {
        std::normal_distribution<double> n(0.0, 0.02);
        for (Eigen::Index c = 0; c < v.cols(); ++c)
          for (Eigen::Index r = 0; r < v.rows(); ++r) v(r, c) = static_cast<T>(n(rng));
        break;
      }
    }
  }
  return p;
}

}  // namespace hithar::model
