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

#include "invrender/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace invrender {

Projection project(const Camera& cam, const Vec3& world) {
  const Vec3 pc = cam.R * world + cam.t;
  Projection p;
  p.depth = pc.z();
  p.in_front = pc.z() > 0;
  if (pc.z() != 0) {
    p.x = cam.f * pc.x() / pc.z() + cam.cx;
    p.y = cam.f * pc.y() / pc.z() + cam.cy;
  }
  return p;
}

Vec3 backproject(const Camera& cam, double x, double y, double depth) {
  const Vec3 pc(depth * (x - cam.cx) / cam.f, depth * (y - cam.cy) / cam.f, depth);
  return cam.R.transpose() * (pc - cam.t);
}

namespace {

bool finite_at(const DepthMap& d, int x, int y) {
  return d.contains(x, y) && std::isfinite(d(x, y));
}

// One-sided where needed; false if neither neighbour is usable.
bool derivative(const DepthMap& d, int x, int y, int dx, int dy, double& out) {
  const bool fwd = finite_at(d, x + dx, y + dy);
  const bool bwd = finite_at(d, x - dx, y - dy);
  if (fwd && bwd) {
    out = 0.5 * (d(x + dx, y + dy) - d(x - dx, y - dy));
  } else if (fwd) {
    out = d(x + dx, y + dy) - d(x, y);
  } else if (bwd) {
    out = d(x, y) - d(x - dx, y - dy);
  } else {
    return false;
  }
  return true;
}

void depth_normal_pixel(const DepthMap& depth, const Camera& cam, int x, int y,
                        NormalMap& out) {
  const std::size_t i = depth.index(x, y);
  out.normals[i] = Vec3(0, 0, 1);
  out.valid[i] = 0;
  const double w = depth[i];
  if (!std::isfinite(w)) return;
  double wx = 0;
  double wy = 0;
  if (!derivative(depth, x, y, 1, 0, wx) || !derivative(depth, x, y, 0, 1, wy)) {
    return;
  }
  const Vec3 n(-cam.f * wx, -cam.f * wy, (x - cam.cx) * wx + (y - cam.cy) * wy + w);
  const double len = n.norm();
  if (!(len > 0)) return;
  const Vec3 u = n / len;
  if (u.z() <= 0) return;
  out.normals[i] = u;
  out.valid[i] = 1;
}

}  // namespace

NormalMap normals_from_depth(const DepthMap& depth, const Camera& cam,
                             kernels::Exec exec) {
  NormalMap out(depth.width(), depth.height());
  const int H = depth.height();
  const int W = depth.width();
  if (exec == kernels::Exec::serial) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) depth_normal_pixel(depth, cam, x, y, out);
    }
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) depth_normal_pixel(depth, cam, x, y, out);
  }
  return out;
}

Vec3 normal_from_params(double p, double q) { return Vec3(p, q, 1.0).normalized(); }

Vec2 params_from_normal(const Vec3& n) {
  if (!(n.z() > 0)) throw Error("params_from_normal: n_z must be positive");
  return Vec2(n.x() / n.z(), n.y() / n.z());
}

Eigen::Matrix<double, 3, 2> normal_from_params_jacobian(double p, double q) {
  const Vec3 v(p, q, 1.0);
  const double len = v.norm();
  const Vec3 n = v / len;
  const Mat3 P = (Mat3::Identity() - n * n.transpose()) / len;
  return P.leftCols<2>();
}

PixelCorrespondence correspond(const DepthMap& depth_tgt, const Camera& cam_tgt,
                               const Camera& cam_src, int src_width,
                               int src_height) {
  PixelCorrespondence out{Grid<Vec2>(depth_tgt.width(), depth_tgt.height(), Vec2::Zero()),
                          Mask(depth_tgt.width(), depth_tgt.height(), 0)};
  // Target camera frame to source camera frame.
  const Mat3 R = cam_src.R * cam_tgt.R.transpose();
  const Vec3 t = cam_src.t - R * cam_tgt.t;
  for (int y = 0; y < depth_tgt.height(); ++y) {
    for (int x = 0; x < depth_tgt.width(); ++x) {
      const double w = depth_tgt(x, y);
      if (!std::isfinite(w) || w <= 0) continue;
      const Vec3 pt(w * (x - cam_tgt.cx) / cam_tgt.f, w * (y - cam_tgt.cy) / cam_tgt.f, w);
      const Vec3 ps = R * pt + t;
      if (ps.z() <= 0) continue;
      const double sx = cam_src.f * ps.x() / ps.z() + cam_src.cx;
      const double sy = cam_src.f * ps.y() / ps.z() + cam_src.cy;
      if (!(sx >= 0 && sy >= 0 && sx <= src_width - 1 && sy <= src_height - 1)) continue;
      out.source(x, y) = Vec2(sx, sy);
      out.valid(x, y) = 1;
    }
  }
  return out;
}

Resampler::Resampler(const PixelCorrespondence& corr, const Mask& src_valid)
    : taps_(corr.valid.size()),
      valid_(corr.valid.width(), corr.valid.height(), 0),
      src_w_(src_valid.width()),
      src_h_(src_valid.height()) {
  require_same_shape(corr.source, corr.valid, "Resampler");
  for (std::size_t i = 0; i < corr.valid.size(); ++i) {
    if (!corr.valid[i]) continue;
    const Vec2& s = corr.source[i];
    int x0 = static_cast<int>(std::floor(s.x()));
    int y0 = static_cast<int>(std::floor(s.y()));
    // Right and bottom edges: step back so the zero-weight tap stays inside.
    if (x0 >= src_w_ - 1) x0 = src_w_ - 2;
    if (y0 >= src_h_ - 1) y0 = src_h_ - 2;
    if (x0 < 0 || y0 < 0) continue;
    const double ax = s.x() - x0;
    const double ay = s.y() - y0;
    kernels::BilinearTap& tap = taps_[i];
    const std::array<std::pair<int, int>, 4> px{
        {{x0, y0}, {x0 + 1, y0}, {x0, y0 + 1}, {x0 + 1, y0 + 1}}};
    const std::array<double, 4> wt{(1 - ax) * (1 - ay), ax * (1 - ay),
                                   (1 - ax) * ay, ax * ay};
    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      const std::size_t si = src_valid.index(px[k].first, px[k].second);
      ok = ok && src_valid[si];
      tap.index[k] = static_cast<std::uint32_t>(si);
      tap.weight[k] = wt[k];
    }
    valid_[i] = ok;
  }
}

template <class T>
Grid<T> Resampler::apply(const Grid<T>& src, kernels::Exec exec) const {
  if (src.width() != src_w_ || src.height() != src_h_) {
    throw Error("Resampler: source shape mismatch");
  }
  Grid<T> out(valid_.width(), valid_.height());
  kernels::gather<T>(taps_, valid_.data(), src.data(), out.data(), exec);
  return out;
}

template <class T>
void Resampler::accumulate_adjoint(const Grid<T>& grad_tgt, Grid<T>& grad_src) const {
  require_same_shape(grad_tgt, valid_, "Resampler adjoint");
  if (grad_src.width() != src_w_ || grad_src.height() != src_h_) {
    throw Error("Resampler adjoint: source shape mismatch");
  }
  for (std::size_t i = 0; i < taps_.size(); ++i) {
    if (!valid_[i]) continue;
    for (int k = 0; k < 4; ++k) {
      grad_src[taps_[i].index[k]] += grad_tgt[i] * taps_[i].weight[k];
    }
  }
}

template Grid<double> Resampler::apply(const Grid<double>&, kernels::Exec) const;
template Grid<Vec3> Resampler::apply(const Grid<Vec3>&, kernels::Exec) const;
template void Resampler::accumulate_adjoint(const Grid<double>&, Grid<double>&) const;
template void Resampler::accumulate_adjoint(const Grid<Vec3>&, Grid<Vec3>&) const;

template <class T>
std::pair<Grid<T>, Mask> cross_project(const Grid<T>& src, const Mask& src_valid,
                                       const DepthMap& depth_tgt,
                                       const Camera& cam_src,
                                       const Camera& cam_tgt) {
  require_same_shape(src, src_valid, "cross_project");
  const PixelCorrespondence corr =
      correspond(depth_tgt, cam_tgt, cam_src, src.width(), src.height());
  const Resampler rs(corr, src_valid);
  return {rs.apply(src), rs.valid()};
}

template std::pair<Grid<double>, Mask> cross_project(const Grid<double>&, const Mask&,
                                                     const DepthMap&, const Camera&,
                                                     const Camera&);
template std::pair<Grid<Vec3>, Mask> cross_project(const Grid<Vec3>&, const Mask&,
                                                   const DepthMap&, const Camera&,
                                                   const Camera&);

// -----------------------------------------------------------------------------

GroundPlane fit_ground_plane(std::span<const Vec3> positions, const Vec3& up) {
  if (positions.size() < 3) throw Error("fit_ground_plane: need at least 3 positions");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : positions) centroid += p;
  centroid /= static_cast<double>(positions.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : positions) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 lambda = eig.eigenvalues();
  // Collinear or coincident input leaves the in-plane spread rank deficient.
  if (!(lambda[1] > 1e-12 * std::max(lambda[2], 1e-300)) || !(lambda[2] > 0)) {
    throw Error("fit_ground_plane: camera positions are collinear");
  }
  Vec3 n = eig.eigenvectors().col(0).normalized();
  if (n.dot(up) < 0) n = -n;
  return GroundPlane{n, n.dot(centroid)};
}

GroundPlane fit_ground_plane(std::span<const Camera> cameras) {
  std::vector<Vec3> pos;
  Vec3 up = Vec3::Zero();
  for (const auto& c : cameras) {
    pos.push_back(c.center());
    up -= c.R.row(1).transpose();
  }
  return fit_ground_plane(pos, up);
}

Vec3 ground_normal_in_camera(const GroundPlane& plane, const Camera& cam) {
  return -(cam.R * plane.normal);
}

NormalMap inpaint_ground_normals(const NormalMap& normals, const Mask& ground,
                                 const GroundPlane& plane, const Camera& cam) {
  require_same_shape(normals.normals, ground, "inpaint_ground_normals");
  NormalMap out = normals;
  const Vec3 n = ground_normal_in_camera(plane, cam).normalized();
  for (std::size_t i = 0; i < ground.size(); ++i) {
    if (!ground[i]) continue;
    if (n.z() > 0) {
      out.normals[i] = n;
      out.valid[i] = 1;
    } else {
      out.valid[i] = 0;
    }
  }
  return out;
}

}  // namespace invrender
