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

// Per-pixel hot loops. Every kernel has a plain serial loop, kept as the
// reference for tests, and an OpenMP version over the same pixel range.
// Kernels only write per-pixel outputs; any reductions happen afterwards in
// a fixed order so results do not depend on the thread count.

#pragma once

#include "invrender/core.hpp"

#include <span>

namespace invrender::kernels {

enum class Exec { serial, parallel };

/// Default policy for library entry points. Honors INVRENDER_THREADS=1.
Exec default_exec();
void set_default_exec(Exec exec);

inline SHBasisRow basis(const Vec3& n) {
  SHBasisRow b;
  b << 1.0, n.x(), n.y(), n.z(), 3 * n.z() * n.z() - 1, n.x() * n.y(),
      n.x() * n.z(), n.y() * n.z(), n.x() * n.x() - n.y() * n.y();
  return b;
}

/// d b / d n, 9x3.
inline Eigen::Matrix<double, 9, 3> basis_jacobian(const Vec3& n) {
  Eigen::Matrix<double, 9, 3> J = Eigen::Matrix<double, 9, 3>::Zero();
  J(1, 0) = 1;
  J(2, 1) = 1;
  J(3, 2) = 1;
  J(4, 2) = 6 * n.z();
  J(5, 0) = n.y();
  J(5, 1) = n.x();
  J(6, 0) = n.z();
  J(6, 2) = n.x();
  J(7, 1) = n.z();
  J(7, 2) = n.y();
  J(8, 0) = 2 * n.x();
  J(8, 1) = -2 * n.y();
  return J;
}

/// Per-channel shading B(n) l.
inline Vec3 shade(const Vec3& n, const SHVector& l) {
  const SHBasisRow b = basis(n);
  return Vec3(b.dot(l.segment<9>(0)), b.dot(l.segment<9>(9)),
              b.dot(l.segment<9>(18)));
}

/// out = albedo * shadow * B(n) l on mask, 0 elsewhere. No clamping.
void render(std::span<const Vec3> albedo, std::span<const double> shadow,
            std::span<const Vec3> normals, const SHVector& l,
            std::span<const std::uint8_t> mask, std::span<Vec3> out,
            Exec exec);

/// Backpropagates a per-pixel gradient g on x = albedo * (B(n) l):
/// writes d/dalbedo, d/dn and the per-pixel contribution to d/dl.
/// The caller sums grad_l_pixel in index order.
void shade_backward(std::span<const Vec3> albedo, std::span<const Vec3> normals,
                    const SHVector& l, std::span<const Vec3> grad_x,
                    std::span<const std::uint8_t> mask,
                    std::span<Vec3> grad_albedo, std::span<Vec3> grad_normal,
                    std::span<SHVector> grad_l_pixel, Exec exec);

/// One bilinear tap set per target pixel.
struct BilinearTap {
  std::array<std::uint32_t, 4> index{};
  std::array<double, 4> weight{};
};

/// out[i] = sum_k w_k src[idx_k] where valid[i], zero elsewhere.
template <class T>
void gather(std::span<const BilinearTap> taps, std::span<const std::uint8_t> valid,
            std::span<const T> src, std::span<T> out, Exec exec);

}  // namespace invrender::kernels
