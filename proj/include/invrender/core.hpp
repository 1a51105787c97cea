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

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace invrender {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using SHVector = Eigen::Matrix<double, 27, 1>;
using SHBasisRow = Eigen::Matrix<double, 9, 1>;

/// Fixed display gamma of stored LDR images.
inline constexpr double kGamma = 2.2;
/// Lower bound of the shadow channel.
inline constexpr double kShadowFloor = 1e-3;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major 2D grid. Origin top-left, x right, y down.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T())
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("grid: negative size");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <class U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;
using DepthMap = Grid<double>;
using AlbedoMap = Grid<Vec3>;
using ShadowMap = Grid<double>;
using NormalParams = Grid<Vec2>;

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(std::string(what) + ": shape mismatch (" +
                std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                " vs " + std::to_string(b.width()) + "x" +
                std::to_string(b.height()) + ")");
  }
}

std::size_t count(const Mask& mask);
Mask mask_and(const Mask& a, const Mask& b);
Mask full_mask(int width, int height);

enum class Encoding { srgb_gamma, linear };

struct ImageRGB {
  Grid<Vec3> pixels;
  Encoding encoding = Encoding::linear;

  ImageRGB() = default;
  ImageRGB(Grid<Vec3> p, Encoding e) : pixels(std::move(p)), encoding(e) {}
  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
};

/// Clamps to [0,1] and rejects non-finite values; used for raw inputs.
ImageRGB make_gamma_image(Grid<Vec3> pixels);

ImageRGB linearize(const ImageRGB& img);
ImageRGB encode_gamma(const ImageRGB& img);

/// CIE L*a*b* (D65) of linear RGB, scaled to (L/100, a/128, b/128).
Vec3 rgb_to_lab(const Vec3& rgb);
/// Jacobian of rgb_to_lab, rows = (L,a,b), cols = (r,g,b).
Mat3 rgb_to_lab_jacobian(const Vec3& rgb);
Grid<Vec3> to_lab(const ImageRGB& img);

/// Unit normals in camera coordinates plus a validity mask.
struct NormalMap {
  Grid<Vec3> normals;
  Mask valid;

  NormalMap() = default;
  NormalMap(int width, int height)
      : normals(width, height, Vec3(0, 0, 1)), valid(width, height, 0) {}
  NormalMap(Grid<Vec3> n, Mask v);
  int width() const { return normals.width(); }
  int height() const { return normals.height(); }
};

/// Pinhole camera. R and t map world to camera coordinates.
struct Camera {
  double f = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 center() const { return -R.transpose() * t; }
  void validate() const;
};

/// Order-2 colour SH lighting, channel-major: [r(0..8), g(0..8), b(0..8)].
struct SHLighting {
  SHVector l = SHVector::Zero();

  SHLighting() = default;
  explicit SHLighting(const SHVector& v) : l(v) {}
  auto channel(int c) { return l.segment<9>(9 * c); }
  auto channel(int c) const { return l.segment<9>(9 * c); }
};

struct LossWeights {
  double appearance = 0.1;
  double nm = 1.0;
  double albedo = 0.1;
  double cross_rend = 0.1;
  double lighting = 0.005;
  double vgg = 2.5;
  double lab = 0.5;

  void validate() const;
};

}  // namespace invrender
