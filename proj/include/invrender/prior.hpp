// Copyright 2026 The invrender Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "invrender/core.hpp"

#include <Eigen/Core>

#include <vector>

namespace invrender {

/// Equirectangular radiance map, width = 2 * height. Row angle theta in
/// [0, pi] from up (top row) to down; column angle phi in [0, 2pi).
///
/// Directions are expressed in the viewer frame used for normals: x right,
/// y down, z away from the camera. A texel at (theta, phi) is the radiance
/// that shades a surface whose normal (in that convention) is
///   d = (sin(theta) cos(phi), cos(theta), sin(theta) sin(phi)),
/// so the sky (theta = 0) lights upward-facing geometry, whose normals
/// point along +y in this frame.
struct EnvMap {
  Grid<Vec3> radiance;

  EnvMap() = default;
  explicit EnvMap(Grid<Vec3> r);
  int width() const { return radiance.width(); }
  int height() const { return radiance.height(); }
};

Vec3 env_direction(double theta, double phi);
/// Texel-centre direction of an env map of the given height.
Vec3 env_texel_direction(int x, int y, int height);

/// Env map whose radiance in direction w is env(R^T w), bilinear lookup.
EnvMap rotate_env(const EnvMap& env, const Mat3& R);

/// Whitened PCA lighting model: l = Q diag(sigma) a + mean.
class PriorModel {
 public:
  PriorModel() = default;
  PriorModel(const SHVector& mean, Eigen::MatrixXd Q, Eigen::VectorXd sigma);

  int dim() const { return static_cast<int>(sigma_.size()); }
  const SHVector& mean() const { return mean_; }
  const Eigen::MatrixXd& basis() const { return Q_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  /// Q diag(sigma), 27 x D.
  const Eigen::MatrixXd& scaled_basis() const { return scaled_; }

  SHLighting reconstruct(const Eigen::VectorXd& coeffs) const;
  Eigen::VectorXd project(const SHLighting& l) const;

 private:
  SHVector mean_ = SHVector::Zero();
  Eigen::MatrixXd Q_;
  Eigen::VectorXd sigma_;
  Eigen::MatrixXd scaled_;
};

inline constexpr int kPriorDim = 18;

/// sin(theta)-weighted least-squares fit of the basis to the radiance,
/// normalized to unit norm.
SHLighting sh_project_envmap(const EnvMap& env);
/// Fit without the final normalization.
SHLighting sh_fit_envmap(const EnvMap& env);

SHLighting normalize_lighting(const SHLighting& l);

/// Rotation used by the augmentation grid: azimuth about the vertical (y)
/// axis, then pitch about x, then roll about z, composed as
/// Ry(azimuth) * Rx(pitch) * Rz(roll).
Mat3 augmentation_rotation(double azimuth, double pitch, double roll);

inline constexpr int kAzimuthSteps = 36;
inline constexpr int kTiltSteps = 7;
inline constexpr int kAugmentationsPerEnv =
    kAzimuthSteps * kTiltSteps * kTiltSteps;

/// All grid rotations of l, renormalized to the input norm. The first
/// entry is the identity rotation.
std::vector<SHLighting> augment_rotations(const SHLighting& l);

/// PCA with sigma = per-component standard deviation.
PriorModel build_prior(const std::vector<SHLighting>& samples,
                       int dim = kPriorDim);

double prior_loss(const Eigen::VectorXd& coeffs);
Eigen::VectorXd prior_loss_gradient(const Eigen::VectorXd& coeffs);

}  // namespace invrender
