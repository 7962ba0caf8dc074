#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

#include "hithar/core/json.hpp"
#include "hithar/core/rng.hpp"
#include "hithar/signal/windows.hpp"

namespace hithar::signal {

struct AugmentConfig {
  bool rotate = true;
  double max_rotation_deg = 15.0;
  bool scale = true;
  double scale_min = 0.9;
  double scale_max = 1.1;
  bool jitter = true;
  double jitter_sigma = 0.02;
  bool mask = true;
  double mask_prob = 0.5;
  int mask_min = 5;
  int mask_max = 15;

  static AugmentConfig none() {
    AugmentConfig c;
    c.rotate = c.scale = c.jitter = c.mask = false;
    return c;
  }

  void validate() const {
    if (max_rotation_deg < 0.0) throw ConfigError("augment.max_rotation_deg must be >= 0");
    if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("augment: need 0 < scale_min <= scale_max");
    if (jitter_sigma < 0.0) throw ConfigError("augment.jitter_sigma must be >= 0");
    if (mask_prob < 0.0 || mask_prob > 1.0) throw ConfigError("augment.mask_prob must be in [0,1]");
    if (mask_min < 0 || mask_min > mask_max) throw ConfigError("augment: need 0 <= mask_min <= mask_max");
  }
};

inline json to_json(const AugmentConfig& c) {
  return json{{"rotate", c.rotate},         {"max_rotation_deg", c.max_rotation_deg},
              {"scale", c.scale},           {"scale_min", c.scale_min},
              {"scale_max", c.scale_max},   {"jitter", c.jitter},
              {"jitter_sigma", c.jitter_sigma}, {"mask", c.mask},
              {"mask_prob", c.mask_prob},   {"mask_min", c.mask_min},
              {"mask_max", c.mask_max}};
}

inline AugmentConfig augment_config_from_json(const json& j, AugmentConfig c = {}) {
  StrictReader r(j, "augment");
  r.get("rotate", c.rotate)
      .get("max_rotation_deg", c.max_rotation_deg)
      .get("scale", c.scale)
      .get("scale_min", c.scale_min)
      .get("scale_max", c.scale_max)
      .get("jitter", c.jitter)
      .get("jitter_sigma", c.jitter_sigma)
      .get("mask", c.mask)
      .get("mask_prob", c.mask_prob)
      .get("mask_min", c.mask_min)
      .get("mask_max", c.mask_max);
  r.finish();
  c.validate();
  return c;
}

/// Normalization applied to a window's data. When supplied, geometric
/// transforms run in physical units and jitter/masking in normalized units.
struct NormContext {
  const NormStats* stats = nullptr;
  Vector8 center = Vector8::Zero();
};

inline Eigen::Matrix3d random_rotation(double max_deg, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d axis;
  do {
    axis = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
  } while (axis.norm() < 1e-12);
  std::uniform_real_distribution<double> angle_dist(-max_deg, max_deg);
  const double angle = angle_dist(rng) * std::numbers::pi / 180.0;
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Order: shared 3D rotation of acc and gyro, uniform scale, Gaussian jitter,
/// temporal masking. Norm rows are recomputed after rotation/scale.
inline Window augment_window(const Window& w, const AugmentConfig& cfg, Rng& rng,
                             const NormContext* norm = nullptr) {
  Window out = w;
  if (!(cfg.rotate || cfg.scale || cfg.jitter || cfg.mask)) return out;
  Eigen::MatrixXd& x = out.data;

  if (cfg.rotate || cfg.scale) {
    if (norm != nullptr && norm->stats != nullptr) {
      x = ((x.colwise() + norm->center).array().colwise() * norm->stats->std.array()).matrix();
      x.colwise() += norm->stats->mean;
    }
    if (cfg.rotate) {
      const Eigen::Matrix3d r = random_rotation(cfg.max_rotation_deg, rng);
      x.topRows(3) = r * x.topRows(3);
      x.middleRows(3, 3) = r * x.middleRows(3, 3);
    }
    if (cfg.scale) {
      std::uniform_real_distribution<double> scale_dist(cfg.scale_min, cfg.scale_max);
      x.topRows(6) *= scale_dist(rng);
    }
    recompute_norms(x);
    if (norm != nullptr && norm->stats != nullptr) {
      x.colwise() -= norm->stats->mean;
      x = x.array().colwise() / norm->stats->std.array();
      x.colwise() -= norm->center;
    }
  }

  if (cfg.jitter && cfg.jitter_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.jitter_sigma);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) += noise(rng);
  }

  if (cfg.mask && x.cols() > 0) {
    std::bernoulli_distribution apply(cfg.mask_prob);
    if (apply(rng)) {
      std::uniform_int_distribution<int> len_dist(cfg.mask_min, cfg.mask_max);
      const int len = std::min<int>(len_dist(rng), static_cast<int>(x.cols()));
      std::uniform_int_distribution<int> start_dist(0, static_cast<int>(x.cols()) - len);
      const int start = start_dist(rng);
      x.middleCols(start, len).setZero();
    }
  }
  return out;
}

}  // namespace hithar::signal
