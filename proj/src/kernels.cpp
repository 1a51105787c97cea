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

#include "invrender/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <type_traits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace invrender::kernels {

namespace {

Exec initial_exec() {
  const char* env = std::getenv("INVRENDER_THREADS");
  const int n = env ? std::atoi(env) : 0;
  if (n == 1) return Exec::serial;
#ifdef _OPENMP
  if (n > 1) omp_set_num_threads(n);
#endif
  return Exec::parallel;
}

std::atomic<Exec>& exec_slot() {
  static std::atomic<Exec> slot{initial_exec()};
  return slot;
}

inline void render_pixel(std::size_t i, std::span<const Vec3> albedo,
                         std::span<const double> shadow,
                         std::span<const Vec3> normals, const SHVector& l,
                         std::span<const std::uint8_t> mask,
                         std::span<Vec3> out) {
  if (!mask[i]) {
    out[i].setZero();
    return;
  }
  out[i] = albedo[i].cwiseProduct(shade(normals[i], l)) * shadow[i];
}

inline void shade_backward_pixel(std::size_t i, std::span<const Vec3> albedo,
                                 std::span<const Vec3> normals,
                                 const SHVector& l, std::span<const Vec3> grad_x,
                                 std::span<const std::uint8_t> mask,
                                 std::span<Vec3> grad_albedo,
                                 std::span<Vec3> grad_normal,
                                 std::span<SHVector> grad_l_pixel) {
  if (!mask[i]) {
    grad_albedo[i].setZero();
    grad_normal[i].setZero();
    grad_l_pixel[i].setZero();
    return;
  }
  const Vec3& n = normals[i];
  const SHBasisRow b = basis(n);
  const Vec3 s(b.dot(l.segment<9>(0)), b.dot(l.segment<9>(9)),
               b.dot(l.segment<9>(18)));
  const Vec3 g_shade = grad_x[i].cwiseProduct(albedo[i]);
  grad_albedo[i] = grad_x[i].cwiseProduct(s);
  SHBasisRow g_b = SHBasisRow::Zero();
  for (int c = 0; c < 3; ++c) {
    grad_l_pixel[i].segment<9>(9 * c) = g_shade[c] * b;
    g_b += g_shade[c] * l.segment<9>(9 * c);
  }
  grad_normal[i] = basis_jacobian(n).transpose() * g_b;
}

}  // namespace

Exec default_exec() { return exec_slot().load(); }
void set_default_exec(Exec exec) { exec_slot().store(exec); }

void render(std::span<const Vec3> albedo, std::span<const double> shadow,
            std::span<const Vec3> normals, const SHVector& l,
            std::span<const std::uint8_t> mask, std::span<Vec3> out,
            Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      render_pixel(i, albedo, shadow, normals, l, mask, out);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    render_pixel(i, albedo, shadow, normals, l, mask, out);
  }
}

void shade_backward(std::span<const Vec3> albedo, std::span<const Vec3> normals,
                    const SHVector& l, std::span<const Vec3> grad_x,
                    std::span<const std::uint8_t> mask,
                    std::span<Vec3> grad_albedo, std::span<Vec3> grad_normal,
                    std::span<SHVector> grad_l_pixel, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(albedo.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      shade_backward_pixel(i, albedo, normals, l, grad_x, mask, grad_albedo,
                           grad_normal, grad_l_pixel);
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    shade_backward_pixel(i, albedo, normals, l, grad_x, mask, grad_albedo,
                         grad_normal, grad_l_pixel);
  }
}

template <class T>
void gather(std::span<const BilinearTap> taps, std::span<const std::uint8_t> valid,
            std::span<const T> src, std::span<T> out, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(taps.size());
  auto body = [&](std::ptrdiff_t i) {
    if (!valid[i]) {
      if constexpr (std::is_arithmetic_v<T>) {
        out[i] = 0;
      } else {
        out[i].setZero();
      }
      return;
    }
    const BilinearTap& t = taps[i];
    T acc = src[t.index[0]] * t.weight[0];
    for (int k = 1; k < 4; ++k) acc += src[t.index[k]] * t.weight[k];
    out[i] = acc;
  };
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

template void gather<double>(std::span<const BilinearTap>,
                             std::span<const std::uint8_t>,
                             std::span<const double>, std::span<double>, Exec);
template void gather<Vec3>(std::span<const BilinearTap>,
                           std::span<const std::uint8_t>, std::span<const Vec3>,
                           std::span<Vec3>, Exec);

}  // namespace invrender::kernels
