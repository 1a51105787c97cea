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

#include "invrender/shlight.hpp"

#include "invrender/kernels.hpp"
#include "invrender/prior.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace invrender {

SHBasisRow sh_basis(const Vec3& n) {
  if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
    throw Error("sh_basis: normal is not unit length");
  }
  return kernels::basis(n);
}

Grid<Vec3> render_signed(const AlbedoMap& albedo, const ShadowMap& shadow,
                         const NormalMap& normals, const SHLighting& light,
                         const Mask& mask) {
  require_same_shape(albedo, shadow, "render");
  require_same_shape(albedo, normals.normals, "render");
  require_same_shape(albedo, mask, "render");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && !normals.valid[i]) {
      throw Error("render: normal invalid inside mask");
    }
  }
  Grid<Vec3> out(albedo.width(), albedo.height(), Vec3::Zero());
  kernels::render(albedo.data(), shadow.data(), normals.normals.data(), light.l,
                  mask.data(), out.data(), kernels::default_exec());
  return out;
}

ImageRGB render(const AlbedoMap& albedo, const ShadowMap& shadow,
                const NormalMap& normals, const SHLighting& light,
                const Mask& mask) {
  ImageRGB out(render_signed(albedo, shadow, normals, light, mask),
               Encoding::linear);
  for (auto& p : out.pixels.data()) p = p.cwiseMax(0.0);
  return out;
}

namespace {

// Minimum-norm least squares through QR followed by an SVD of the small
// triangular factor: A = Q R, R = U S V^T.
struct Pinv {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr;
  Eigen::MatrixXd U;  // n x n, left vectors of R
  Eigen::VectorXd s;
  Eigen::MatrixXd V;
  int rank = 0;
  Eigen::Index rows = 0;

  explicit Pinv(const Eigen::MatrixXd& A) : qr(A), rows(A.rows()) {
    const Eigen::Index n = A.cols();
    Eigen::MatrixXd R =
        qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    U = svd.matrixU();
    s = svd.singularValues();
    V = svd.matrixV();
    const double cutoff = kPinvCutoff * (s.size() ? s[0] : 0.0);
    rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > cutoff;
  }

  Eigen::VectorXd inv_s() const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(s.size());
    for (int i = 0; i < rank; ++i) r[i] = 1.0 / s[i];
    return r;
  }

  // A^+ y
  Eigen::VectorXd solve(const Eigen::VectorXd& y) const {
    const Eigen::Index n = V.rows();
    Eigen::VectorXd qty = qr.householderQ().transpose() * y;
    Eigen::VectorXd c = U.transpose() * qty.head(n);
    return V * inv_s().cwiseProduct(c);
  }

  // (A^+)^T g = Q [U S^+ V^T g; 0]
  Eigen::VectorXd solve_transpose(const Eigen::VectorXd& g) const {
    const Eigen::Index n = V.rows();
    Eigen::VectorXd top = U * inv_s().cwiseProduct(V.transpose() * g);
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(rows);
    padded.head(n) = top;
    return qr.householderQ() * padded;
  }

  // (A^T A)^+ g
  Eigen::VectorXd normal_inverse(const Eigen::VectorXd& g) const {
    const Eigen::VectorXd is = inv_s();
    return V * is.cwiseProduct(is).cwiseProduct(V.transpose() * g);
  }

  // (I - A^+ A) g
  Eigen::VectorXd null_component(const Eigen::VectorXd& g) const {
    Eigen::VectorXd r = g;
    for (int i = 0; i < rank; ++i) r -= V.col(i) * V.col(i).dot(g);
    return r;
  }
};

std::vector<std::size_t> mask_indices(const Mask& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(i);
  }
  return idx;
}

void check_solve_inputs(const Grid<Vec3>& target, const AlbedoMap& albedo,
                        const ShadowMap& shadow, const Grid<Vec3>& normals,
                        const Mask& mask, std::size_t min_pixels) {
  require_same_shape(target, albedo, "solve_lighting");
  require_same_shape(target, shadow, "solve_lighting");
  require_same_shape(target, normals, "solve_lighting");
  require_same_shape(target, mask, "solve_lighting");
  if (count(mask) < min_pixels) {
    throw Error("solve_lighting: mask has fewer than " +
                std::to_string(min_pixels) + " pixels");
  }
}

// Stacked channel-major system: row c*K + k holds pixel k, channel c.
Eigen::MatrixXd design_matrix(const std::vector<std::size_t>& idx,
                              const AlbedoMap& albedo, const ShadowMap& shadow,
                              const Grid<Vec3>& normals) {
  const Eigen::Index K = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * K, 27);
  for (Eigen::Index k = 0; k < K; ++k) {
    const std::size_t i = idx[k];
    const SHBasisRow b = kernels::basis(normals[i]);
    for (int c = 0; c < 3; ++c) {
      A.block<1, 9>(c * K + k, 9 * c) = (albedo[i][c] * shadow[i]) * b.transpose();
    }
  }
  return A;
}

Eigen::VectorXd stacked_target(const std::vector<std::size_t>& idx,
                               const Grid<Vec3>& target) {
  const Eigen::Index K = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd y(3 * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (int c = 0; c < 3; ++c) y[c * K + k] = target[idx[k]][c];
  }
  return y;
}

}  // namespace

LightingSolve solve_lighting_linear(const Grid<Vec3>& target,
                                    const AlbedoMap& albedo,
                                    const ShadowMap& shadow,
                                    const Grid<Vec3>& normals,
                                    const Mask& mask) {
  check_solve_inputs(target, albedo, shadow, normals, mask, 27);
  const auto idx = mask_indices(mask);
  const Eigen::MatrixXd A = design_matrix(idx, albedo, shadow, normals);
  const Eigen::VectorXd y = stacked_target(idx, target);
  const Pinv pinv(A);
  LightingSolve out;
  out.light.l = pinv.solve(y);
  out.rank = pinv.rank;
  out.degenerate = pinv.rank < 27;
  out.residual = (A * out.light.l - y).norm();
  return out;
}

LightingSolve solve_lighting(const ImageRGB& img, const AlbedoMap& albedo,
                             const ShadowMap& shadow, const NormalMap& normals,
                             const Mask& mask) {
  const ImageRGB lin = linearize(img);
  require_same_shape(normals.normals, mask, "solve_lighting");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && !normals.valid[i]) {
      throw Error("solve_lighting: normal invalid inside mask");
    }
  }
  return solve_lighting_linear(lin.pixels, albedo, shadow, normals.normals,
                               mask);
}

PriorLightingSolve solve_lighting_in_prior_linear(const Grid<Vec3>& target,
                                                  const AlbedoMap& albedo,
                                                  const ShadowMap& shadow,
                                                  const Grid<Vec3>& normals,
                                                  const Mask& mask,
                                                  const PriorModel& prior) {
  const int D = prior.dim();
  check_solve_inputs(target, albedo, shadow, normals, mask,
                     static_cast<std::size_t>(D));
  const auto idx = mask_indices(mask);
  const Eigen::MatrixXd A = design_matrix(idx, albedo, shadow, normals);
  const Eigen::VectorXd y = stacked_target(idx, target);
  const Eigen::VectorXd rhs = y - A * prior.mean();
  const Eigen::MatrixXd AQ = A * prior.scaled_basis();
  const Pinv pinv(AQ);
  PriorLightingSolve out;
  out.coeffs = pinv.solve(rhs);
  out.light = prior.reconstruct(out.coeffs);
  out.rank = pinv.rank;
  out.degenerate = pinv.rank < D;
  out.residual = (AQ * out.coeffs - rhs).norm();
  return out;
}

PriorLightingSolve solve_lighting_in_prior(const ImageRGB& img,
                                           const AlbedoMap& albedo,
                                           const ShadowMap& shadow,
                                           const NormalMap& normals,
                                           const Mask& mask,
                                           const PriorModel& prior) {
  const ImageRGB lin = linearize(img);
  return solve_lighting_in_prior_linear(lin.pixels, albedo, shadow,
                                        normals.normals, mask, prior);
}

LightingSolveGrad solve_lighting_vjp(const Grid<Vec3>& target,
                                     const AlbedoMap& albedo,
                                     const ShadowMap& shadow,
                                     const Grid<Vec3>& normals,
                                     const Mask& mask, const SHVector& g) {
  check_solve_inputs(target, albedo, shadow, normals, mask, 27);
  const auto idx = mask_indices(mask);
  const Eigen::Index K = static_cast<Eigen::Index>(idx.size());
  const Eigen::MatrixXd A = design_matrix(idx, albedo, shadow, normals);
  const Eigen::VectorXd y = stacked_target(idx, target);
  const Pinv pinv(A);
  const Eigen::VectorXd l = pinv.solve(y);
  const Eigen::VectorXd r = y - A * l;
  const Eigen::VectorXd gv = g;
  // d<g,l> = -u^T dA l + r^T dA v + w^T dA z (Golub & Pereyra).
  const Eigen::VectorXd u = pinv.solve_transpose(gv);
  const Eigen::VectorXd v = pinv.normal_inverse(gv);
  const Eigen::VectorXd w = pinv.solve_transpose(l);
  const Eigen::VectorXd z = pinv.null_component(gv);

  LightingSolveGrad out{AlbedoMap(albedo.width(), albedo.height(), Vec3::Zero()),
                        ShadowMap(albedo.width(), albedo.height(), 0.0),
                        Grid<Vec3>(albedo.width(), albedo.height(), Vec3::Zero())};
  for (Eigen::Index k = 0; k < K; ++k) {
    const std::size_t i = idx[k];
    const Vec3& n = normals[i];
    const SHBasisRow b = kernels::basis(n);
    const auto J = kernels::basis_jacobian(n);
    for (int c = 0; c < 3; ++c) {
      const Eigen::Index row = c * K + k;
      // dE/dA(row, 9c + j) for j = 0..8.
      const SHBasisRow gA = -u[row] * l.segment<9>(9 * c) +
                            r[row] * v.segment<9>(9 * c) +
                            w[row] * z.segment<9>(9 * c);
      const double gb = gA.dot(b);
      out.albedo[i][c] += gb * shadow[i];
      out.shadow[i] += gb * albedo[i][c];
      out.normal[i] += (albedo[i][c] * shadow[i]) * (J.transpose() * gA);
    }
  }
  return out;
}

// -----------------------------------------------------------------------------

namespace {

// Fixed well-spread directions; the 9 basis functions span a
// rotation-invariant space, so a least-squares fit on them is exact.
struct RotationFit {
  Eigen::MatrixXd dirs;     // N x 3
  Eigen::MatrixXd fit;      // 9 x N, left inverse of the basis rows

  RotationFit() {
    constexpr int N = 32;
    dirs.resize(N, 3);
    Eigen::MatrixXd B(N, 9);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < N; ++k) {
      const double y = 1.0 - 2.0 * (k + 0.5) / N;
      const double r = std::sqrt(1.0 - y * y);
      const Vec3 d(r * std::cos(golden * k), y, r * std::sin(golden * k));
      dirs.row(k) = d.transpose();
      B.row(k) = kernels::basis(d).transpose();
    }
    fit = B.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(N, N));
  }
};

const RotationFit& rotation_fit() {
  static const RotationFit f;
  return f;
}

}  // namespace

SHRotation::SHRotation(const Mat3& R) {
  const RotationFit& rf = rotation_fit();
  const Eigen::Index N = rf.dirs.rows();
  Eigen::MatrixXd T(N, 9);
  for (Eigen::Index k = 0; k < N; ++k) {
    const Vec3 w = rf.dirs.row(k).transpose();
    T.row(k) = kernels::basis(R.transpose() * w).transpose();
  }
  block_ = rf.fit * T;
}

Eigen::Matrix<double, 27, 27> SHRotation::full() const {
  Eigen::Matrix<double, 27, 27> M = Eigen::Matrix<double, 27, 27>::Zero();
  for (int c = 0; c < 3; ++c) M.block<9, 9>(9 * c, 9 * c) = block_;
  return M;
}

SHVector SHRotation::apply(const SHVector& l) const {
  SHVector out;
  for (int c = 0; c < 3; ++c) out.segment<9>(9 * c) = block_ * l.segment<9>(9 * c);
  return out;
}

SHLighting SHRotation::apply(const SHLighting& l) const {
  return SHLighting(apply(l.l));
}

SHVector SHRotation::apply_transpose(const SHVector& g) const {
  SHVector out;
  for (int c = 0; c < 3; ++c) {
    out.segment<9>(9 * c) = block_.transpose() * g.segment<9>(9 * c);
  }
  return out;
}

SHRotation SHRotation::operator*(const SHRotation& o) const {
  SHRotation r;
  r.block_ = block_ * o.block_;
  return r;
}

SHRotation sh_rotation(const Mat3& R) {
  if (!(R.transpose() * R - Mat3::Identity()).isZero(1e-9) ||
      std::abs(R.determinant() - 1.0) > 1e-9) {
    throw Error("sh_rotation: not a proper rotation");
  }
  return SHRotation(R);
}

// -----------------------------------------------------------------------------

bool hemisphere_normal(int x, int y, int resolution, Vec3& n) {
  const double u = (2.0 * x + 1.0) / resolution - 1.0;
  const double v = (2.0 * y + 1.0) / resolution - 1.0;
  const double r2 = u * u + v * v;
  if (r2 >= 1.0) return false;
  n = Vec3(u, v, std::sqrt(1.0 - r2));
  return true;
}

Mask hemisphere_mask(int resolution) {
  Mask m(resolution, resolution, 0);
  Vec3 n;
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) m(x, y) = hemisphere_normal(x, y, resolution, n);
  }
  return m;
}

ImageRGB render_hemisphere(const SHLighting& l, int resolution) {
  if (resolution < 16) throw Error("render_hemisphere: resolution < 16");
  Grid<Vec3> out(resolution, resolution, Vec3::Zero());
  Vec3 n;
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      if (hemisphere_normal(x, y, resolution, n)) out(x, y) = kernels::shade(n, l.l);
    }
  }
  return ImageRGB(std::move(out), Encoding::linear);
}

}  // namespace invrender
