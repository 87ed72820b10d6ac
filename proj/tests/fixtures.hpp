#pragma once

// Reference parameter values used across the test suites: the generating
// truth of the simulation study (change-point model with omega stored first).

#include <Eigen/Dense>

namespace fixtures {

inline Eigen::Vector4d mu_r() { return {0.90, -0.50, -0.20, 0.60}; }

inline Eigen::Vector4d sd_r() { return {0.15, 0.20, 0.27, 1.20}; }

inline Eigen::Matrix4d corr_r() {
  Eigen::Matrix4d g;
  g << 1.000, -0.415, -0.220, -0.280,  //
      -0.415, 1.000, 0.560, 0.200,     //
      -0.220, 0.560, 1.000, 0.185,     //
      -0.280, 0.200, 0.185, 1.000;
  return g;
}

inline Eigen::Matrix4d sigma_r() {
  const Eigen::Vector4d sd = sd_r();
  return sd.asDiagonal() * corr_r() * sd.asDiagonal();
}

// Survival and outcome truth.
inline constexpr double kGamma1 = 0.18;
inline constexpr double kEta = 3.76;
inline constexpr double kAlpha = 1.88;
inline constexpr double kBeta1 = -0.01;
inline constexpr double kSigmaY = 0.08;

}  // namespace fixtures
