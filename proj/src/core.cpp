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

#include "invrender/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace invrender {

std::size_t count(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

Mask mask_and(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "mask_and");
  Mask out(a.width(), a.height(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

Mask full_mask(int width, int height) { return Mask(width, height, 1); }

ImageRGB make_gamma_image(Grid<Vec3> pixels) {
  for (auto& p : pixels.data()) {
    if (!p.allFinite()) throw Error("image: non-finite pixel");
    p = p.cwiseMax(0.0).cwiseMin(1.0);
  }
  return ImageRGB(std::move(pixels), Encoding::srgb_gamma);
}

ImageRGB linearize(const ImageRGB& img) {
  if (img.encoding != Encoding::srgb_gamma) {
    throw Error("linearize: image is already linear");
  }
  ImageRGB out(img.pixels, Encoding::linear);
  for (auto& p : out.pixels.data()) {
    for (int c = 0; c < 3; ++c) p[c] = std::pow(std::max(p[c], 0.0), kGamma);
  }
  return out;
}

ImageRGB encode_gamma(const ImageRGB& img) {
  if (img.encoding != Encoding::linear) {
    throw Error("encode_gamma: image is not linear");
  }
  ImageRGB out(img.pixels, Encoding::srgb_gamma);
  for (auto& p : out.pixels.data()) {
    for (int c = 0; c < 3; ++c) {
      p[c] = std::pow(std::clamp(p[c], 0.0, 1.0), 1.0 / kGamma);
    }
  }
  return out;
}

namespace {

// Linear sRGB primaries to XYZ, D65.
const Mat3& rgb_to_xyz() {
  static const Mat3 m = (Mat3() << 0.4124564, 0.3575761, 0.1804375,  //
                         0.2126729, 0.7151522, 0.0721750,            //
                         0.0193339, 0.1191920, 0.9503041)
                            .finished();
  return m;
}

const Vec3 kWhiteD65(0.95047, 1.0, 1.08883);
constexpr double kDelta = 6.0 / 29.0;

double lab_f(double t) {
  if (t > kDelta * kDelta * kDelta) return std::cbrt(t);
  return t / (3 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_df(double t) {
  if (t > kDelta * kDelta * kDelta) {
    const double c = std::cbrt(t);
    return 1.0 / (3 * c * c);
  }
  return 1.0 / (3 * kDelta * kDelta);
}

// Rows of d(L,a,b)/d(fx,fy,fz) after the output scaling.
const Mat3& lab_from_f() {
  static const Mat3 m = (Mat3() << 0, 1.16, 0,  //
                         500.0 / 128, -500.0 / 128, 0,  //
                         0, 200.0 / 128, -200.0 / 128)
                            .finished();
  return m;
}

}  // namespace

Vec3 rgb_to_lab(const Vec3& rgb) {
  const Vec3 xyz = (rgb_to_xyz() * rgb).cwiseQuotient(kWhiteD65);
  const Vec3 f(lab_f(xyz[0]), lab_f(xyz[1]), lab_f(xyz[2]));
  Vec3 lab = lab_from_f() * f;
  lab[0] -= 0.16;
  return lab;
}

Mat3 rgb_to_lab_jacobian(const Vec3& rgb) {
  const Vec3 xyz = (rgb_to_xyz() * rgb).cwiseQuotient(kWhiteD65);
  const Vec3 df(lab_df(xyz[0]) / kWhiteD65[0], lab_df(xyz[1]) / kWhiteD65[1],
                lab_df(xyz[2]) / kWhiteD65[2]);
  return lab_from_f() * df.asDiagonal() * rgb_to_xyz();
}

Grid<Vec3> to_lab(const ImageRGB& img) {
  if (img.encoding != Encoding::linear) throw Error("to_lab: expects linear");
  Grid<Vec3> out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = rgb_to_lab(img.pixels[i]);
  }
  return out;
}

NormalMap::NormalMap(Grid<Vec3> n, Mask v)
    : normals(std::move(n)), valid(std::move(v)) {
  require_same_shape(normals, valid, "NormalMap");
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!valid[i]) continue;
    const Vec3& p = normals[i];
    if (!p.allFinite() || std::abs(p.norm() - 1.0) > 1e-6 || p.z() <= 0) {
      throw Error("NormalMap: valid normals must be unit with n_z > 0");
    }
  }
}

void Camera::validate() const {
  if (!(f > 0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error("camera: invalid intrinsics");
  }
  if (!(R.transpose() * R - Mat3::Identity()).isZero(1e-9) ||
      std::abs(R.determinant() - 1.0) > 1e-9) {
    throw Error("camera: R is not a proper rotation");
  }
  if (!t.allFinite()) throw Error("camera: non-finite translation");
}

void LossWeights::validate() const {
  for (double w : {appearance, nm, albedo, cross_rend, lighting, vgg, lab}) {
    if (!(w >= 0)) throw Error("loss weights must be non-negative");
  }
}

}  // namespace invrender
