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
#include "invrender/kernels.hpp"

#include <span>
#include <utility>
#include <vector>

namespace invrender {

// Pixel (i, j) has its centre at image coordinates (i, j).

struct Projection {
  double x = 0;
  double y = 0;
  double depth = 0;
  bool in_front = false;
};

Projection project(const Camera& cam, const Vec3& world);
Vec3 backproject(const Camera& cam, double x, double y, double depth);

/// Normals from a perspective depth map using
///   n ~ [-f w_x, -f w_y, (x - cx) w_x + (y - cy) w_y + w].
/// Central differences where both neighbours are finite, one-sided
/// otherwise; pixels with no usable neighbour or n_z <= 0 are invalid.
NormalMap normals_from_depth(const DepthMap& depth, const Camera& cam,
                             kernels::Exec exec = kernels::default_exec());

/// (p, q) = (n_x / n_z, n_y / n_z) to the unit normal (p, q, 1) / |.|.
Vec3 normal_from_params(double p, double q);
Vec2 params_from_normal(const Vec3& n);
/// d n / d (p, q).
Eigen::Matrix<double, 3, 2> normal_from_params_jacobian(double p, double q);

/// Source-view coordinates of every target pixel.
struct PixelCorrespondence {
  Grid<Vec2> source;
  Mask valid;
};

/// Back-projects each target pixel with its depth, moves it into the source
/// camera and projects. Invalid where the depth is a hole, the point is
/// behind the source camera, or it lands outside the source image.
PixelCorrespondence correspond(const DepthMap& depth_tgt, const Camera& cam_tgt,
                               const Camera& cam_src, int src_width,
                               int src_height);

/// Bilinear resampling operator from a source grid onto target pixels.
/// A target pixel is valid only if all four support pixels are valid in the
/// source. Linear, so it has an exact adjoint.
class Resampler {
 public:
  Resampler() = default;
  Resampler(const PixelCorrespondence& corr, const Mask& src_valid);

  int target_width() const { return valid_.width(); }
  int target_height() const { return valid_.height(); }
  int source_width() const { return src_w_; }
  int source_height() const { return src_h_; }
  const Mask& valid() const { return valid_; }

  template <class T>
  Grid<T> apply(const Grid<T>& src,
                kernels::Exec exec = kernels::default_exec()) const;

  /// grad_src += R^T grad_tgt (serial, fixed order).
  template <class T>
  void accumulate_adjoint(const Grid<T>& grad_tgt, Grid<T>& grad_src) const;

 private:
  std::vector<kernels::BilinearTap> taps_;
  Mask valid_;
  int src_w_ = 0;
  int src_h_ = 0;
};

/// Resamples src (defined on the source view) onto the target view.
template <class T>
std::pair<Grid<T>, Mask> cross_project(const Grid<T>& src, const Mask& src_valid,
                                       const DepthMap& depth_tgt,
                                       const Camera& cam_src,
                                       const Camera& cam_tgt);

/// Plane normal . X = offset, normal of unit length (world frame).
struct GroundPlane {
  Vec3 normal = Vec3::UnitY();
  double offset = 0;
};

/// PCA plane through the camera centres. The normal is oriented to agree
/// with the mean camera up direction (-R.row(1)).
GroundPlane fit_ground_plane(std::span<const Camera> cameras);
GroundPlane fit_ground_plane(std::span<const Vec3> positions, const Vec3& up);

/// Camera-frame normal assigned to ground pixels. The plane normal points
/// up and away from the ground; normals in this library follow the
/// depth-map convention (n_z > 0 on visible surfaces), which is the
/// negated outward normal, so the ground gets -R * plane.normal.
Vec3 ground_normal_in_camera(const GroundPlane& plane, const Camera& cam);

NormalMap inpaint_ground_normals(const NormalMap& normals, const Mask& ground,
                                 const GroundPlane& plane, const Camera& cam);

}  // namespace invrender
