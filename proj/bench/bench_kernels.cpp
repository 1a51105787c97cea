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

// Serial reference kernels against their OpenMP counterparts.
// Argument 0 selects serial, 1 parallel; the range argument is the image side.

#include "invrender/geometry.hpp"
#include "invrender/kernels.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace invrender;

namespace {

struct Inputs {
  std::vector<Vec3> albedo, normals, grad;
  std::vector<double> shadow;
  std::vector<std::uint8_t> mask;
  SHVector light;

  explicit Inputs(int n) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    const std::size_t N = std::size_t(n) * n;
    for (std::size_t i = 0; i < N; ++i) {
      albedo.emplace_back(u(rng), u(rng), u(rng));
      normals.push_back(Vec3(u(rng) - 0.5, u(rng) - 0.5, 1.0).normalized());
      grad.emplace_back(u(rng), u(rng), u(rng));
      shadow.push_back(u(rng));
      mask.push_back(1);
    }
    for (int k = 0; k < 27; ++k) light[k] = u(rng) - 0.5;
  }
};

kernels::Exec exec_of(const benchmark::State& s) {
  return s.range(0) ? kernels::Exec::parallel : kernels::Exec::serial;
}

void BM_Render(benchmark::State& state) {
  const Inputs in(static_cast<int>(state.range(1)));
  std::vector<Vec3> out(in.albedo.size());
  for (auto _ : state) {
    kernels::render(in.albedo, in.shadow, in.normals, in.light, in.mask, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(out.size()));
}

void BM_ShadeBackward(benchmark::State& state) {
  const Inputs in(static_cast<int>(state.range(1)));
  const std::size_t N = in.albedo.size();
  std::vector<Vec3> ga(N), gn(N);
  std::vector<SHVector> gl(N);
  for (auto _ : state) {
    kernels::shade_backward(in.albedo, in.normals, in.light, in.grad, in.mask, ga, gn, gl,
                            exec_of(state));
    benchmark::DoNotOptimize(gl.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(N));
}

void BM_Gather(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  const Inputs in(n);
  PixelCorrespondence corr{Grid<Vec2>(n, n), Mask(n, n, 1)};
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      corr.source(x, y) = Vec2(std::min(x + 0.37, n - 1.0), std::min(y * 0.9 + 0.21, n - 1.0));
    }
  }
  const Resampler rs(corr, Mask(n, n, 1));
  Grid<Vec3> src(n, n);
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = in.albedo[i];
  for (auto _ : state) {
    Grid<Vec3> out = rs.apply(src, exec_of(state));
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(src.size()));
}

void BM_NormalsFromDepth(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  Camera cam;
  cam.f = n;
  cam.cx = cam.cy = 0.5 * n;
  DepthMap depth(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) depth(x, y) = 4.0 + 0.3 * std::sin(0.05 * x) * std::cos(0.07 * y);
  }
  for (auto _ : state) {
    NormalMap nm = normals_from_depth(depth, cam, exec_of(state));
    benchmark::DoNotOptimize(nm.normals.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(depth.size()));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int par : {0, 1}) {
    for (int n : {64, 200, 512}) b->Args({par, n});
  }
  b->ArgNames({"parallel", "side"});
}

}  // namespace

BENCHMARK(BM_Render)->Apply(sizes);
BENCHMARK(BM_ShadeBackward)->Apply(sizes);
BENCHMARK(BM_Gather)->Apply(sizes);
BENCHMARK(BM_NormalsFromDepth)->Apply(sizes);

BENCHMARK_MAIN();
