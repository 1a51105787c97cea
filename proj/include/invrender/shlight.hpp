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

// Order-2 spherical harmonic lighting on the polynomial basis
//   b(n) = [1, x, y, z, 3z^2-1, xy, xz, yz, x^2-y^2]
// shared by every colour channel (B(n) = I3 kron b(n)).

#pragma once

#include "invrender/core.hpp"

#include <Eigen/Core>

namespace invrender {

class PriorModel;

/// Throws if |n| differs from 1 by more than 1e-6.
SHBasisRow sh_basis(const Vec3& n);

/// Lambertian SH render, clamped at zero. Pixels off the mask are zero.
ImageRGB render(const AlbedoMap& albedo, const ShadowMap& shadow,
                const NormalMap& normals, const SHLighting& light,
                const Mask& mask);
/// Same as render() without the clamp.
Grid<Vec3> render_signed(const AlbedoMap& albedo, const ShadowMap& shadow,
                         const NormalMap& normals, const SHLighting& light,
                         const Mask& mask);

struct LightingSolve {
  SHLighting light;
  bool degenerate = false;
  int rank = 0;
  /// Least-squares residual norm in linear RGB.
  double residual = 0.0;
};

/// Relative singular value cutoff of the pseudoinverse.
inline constexpr double kPinvCutoff = 1e-8;

/// Least-squares lighting from a gamma-encoded image given the other maps.
LightingSolve solve_lighting(const ImageRGB& img, const AlbedoMap& albedo,
                             const ShadowMap& shadow, const NormalMap& normals,
                             const Mask& mask);

/// Same as solve_lighting for an already linear target (i^gamma).
LightingSolve solve_lighting_linear(const Grid<Vec3>& target,
                                    const AlbedoMap& albedo,
                                    const ShadowMap& shadow,
                                    const Grid<Vec3>& normals, const Mask& mask);

struct PriorLightingSolve {
  Eigen::VectorXd coeffs;
  SHLighting light;
  bool degenerate = false;
  int rank = 0;
  double residual = 0.0;
};

PriorLightingSolve solve_lighting_in_prior(const ImageRGB& img,
                                           const AlbedoMap& albedo,
                                           const ShadowMap& shadow,
                                           const NormalMap& normals,
                                           const Mask& mask,
                                           const PriorModel& prior);

PriorLightingSolve solve_lighting_in_prior_linear(const Grid<Vec3>& target,
                                                  const AlbedoMap& albedo,
                                                  const ShadowMap& shadow,
                                                  const Grid<Vec3>& normals,
                                                  const Mask& mask,
                                                  const PriorModel& prior);

/// Gradients of <g, solve_lighting(...)> with respect to the inputs,
/// through the closed-form derivative of the pseudoinverse.
struct LightingSolveGrad {
  AlbedoMap albedo;
  ShadowMap shadow;
  Grid<Vec3> normal;  // d/dn (unnormalized direction)
};

LightingSolveGrad solve_lighting_vjp(const Grid<Vec3>& target,
                                     const AlbedoMap& albedo,
                                     const ShadowMap& shadow,
                                     const Grid<Vec3>& normals,
                                     const Mask& mask, const SHVector& g);

/// Coefficient-space rotation: for every direction w and lighting l,
/// b(w) . (M l) == b(R^T w) . l. Identical 9x9 block per channel.
class SHRotation {
 public:
  using Block = Eigen::Matrix<double, 9, 9>;

  SHRotation() : block_(Block::Identity()) {}
  explicit SHRotation(const Mat3& R);

  const Block& block() const { return block_; }
  Eigen::Matrix<double, 27, 27> full() const;
  SHLighting apply(const SHLighting& l) const;
  SHVector apply(const SHVector& l) const;
  SHVector apply_transpose(const SHVector& g) const;

  SHRotation operator*(const SHRotation& o) const;

 private:
  Block block_;
};

SHRotation sh_rotation(const Mat3& R);

/// Orthographic front-hemisphere render of a unit sphere (albedo 1, no
/// shadow); pixels outside the disc are zero.
ImageRGB render_hemisphere(const SHLighting& l, int resolution);
Mask hemisphere_mask(int resolution);
/// Normal seen at hemisphere pixel (x, y); false outside the disc.
bool hemisphere_normal(int x, int y, int resolution, Vec3& n);

}  // namespace invrender
