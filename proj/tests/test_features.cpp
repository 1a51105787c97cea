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

#include "invrender/features.hpp"

#include "invrender/io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace invrender;
using namespace invrender::testing;

namespace {

Grid<Vec3> random_image(std::mt19937_64& rng, int W, int H) {
  Grid<Vec3> g(W, H);
  for (auto& v : g.data()) v = Vec3(uniform(rng, 0.05, 0.9), uniform(rng, 0.05, 0.9), uniform(rng, 0.05, 0.9));
  return g;
}

Mask ragged_mask(int W, int H) {
  Mask m = full_mask(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (x + 2 * y < 5 || (x - 10) * (x - 10) + (y - 6) * (y - 6) < 5) m(x, y) = 0;
    }
  }
  return m;
}

std::shared_ptr<FilterBankTransform> small_bank(std::mt19937_64& rng) {
  std::vector<Grid<Vec3>> filters;
  for (int n = 0; n < 2; ++n) filters.push_back(random_image(rng, 3, 3));
  return std::make_shared<FilterBankTransform>(1.5, 3, std::move(filters));
}

void check_gradients(const TransformSet& ts, std::mt19937_64& rng) {
  const int W = 16, H = 12;
  const Grid<Vec3> x = random_image(rng, W, H);
  const Grid<Vec3> y = random_image(rng, W, H);
  const Mask m = ragged_mask(W, H);
  Grid<Vec3> gx(W, H, Vec3::Zero()), gy(W, H, Vec3::Zero());
  const double scale = 0.7;
  perceptual_error(x, y, m, ts, &gx, &gy, scale);
  const double h = 1e-6;
  int checked = 0;
  for (int i : {17, 40, 81, 100, 150, 191}) {
    for (int c = 0; c < 3; ++c) {
      Grid<Vec3> xp = x, xm = x;
      xp[i][c] += h;
      xm[i][c] -= h;
      const double fd =
          scale * (perceptual_error(xp, y, m, ts) - perceptual_error(xm, y, m, ts)) / (2 * h);
      CHECK(std::abs(fd - gx[i][c]) < 1e-6 * std::max(1.0, std::abs(fd)));
      Grid<Vec3> yp = y, ym = y;
      yp[i][c] += h;
      ym[i][c] -= h;
      const double fdy =
          scale * (perceptual_error(x, yp, m, ts) - perceptual_error(x, ym, m, ts)) / (2 * h);
      CHECK(std::abs(fdy - gy[i][c]) < 1e-6 * std::max(1.0, std::abs(fdy)));
      checked += std::abs(fd) > 0;
    }
  }
  CHECK(checked > 0);
}

}  // namespace

TEST_CASE("identical inputs have zero error") {
  std::mt19937_64 rng(1);
  const Grid<Vec3> x = random_image(rng, 20, 20);
  TransformSet ts = default_transforms(LossWeights{});
  ts.push_back(small_bank(rng));
  Grid<Vec3> g(20, 20, Vec3::Zero());
  CHECK(perceptual_error(x, x, full_mask(20, 20), ts, &g) == 0.0);
  for (const auto& v : g.data()) CHECK(v.norm() == 0.0);
}

TEST_CASE("default transforms carry the configured weights") {
  LossWeights w;
  w.lab = 0.25;
  w.vgg = 4.0;
  const TransformSet ts = default_transforms(w);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0]->name() == "lab");
  CHECK(ts[0]->weight() == 0.25);
  CHECK(ts[1]->name() == "pyramid-grad");
  CHECK(ts[1]->weight() == 4.0);
  CHECK_THROWS_AS(make_transforms({"vgg19"}, w), Error);
}

TEST_CASE("lab features are per-pixel lab values") {
  std::mt19937_64 rng(2);
  const Grid<Vec3> x = random_image(rng, 5, 4);
  Mask m = full_mask(5, 4);
  m(2, 2) = 0;
  const FeatureStack f = LabTransform(1.0).forward(x, m);
  int valid = 0;
  for (std::size_t e = 0; e < f.values.size(); ++e) valid += f.valid[e];
  CHECK(valid == 3 * 19);
  // Oracle: rms of the lab difference over valid pixel channels.
  const Grid<Vec3> y = random_image(rng, 5, 4);
  double sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (m[i]) sum += (rgb_to_lab(x[i]) - rgb_to_lab(y[i])).squaredNorm();
  }
  const TransformSet ts = {std::make_shared<LabTransform>(0.5)};
  CHECK(perceptual_error(x, y, m, ts) == doctest::Approx(0.5 * std::sqrt(sum / (3 * 19))));
}

TEST_CASE("lab gradient matches finite differences") {
  std::mt19937_64 rng(3);
  check_gradients({std::make_shared<LabTransform>(0.5)}, rng);
}

TEST_CASE("pyramid gradient transform gradient matches finite differences") {
  std::mt19937_64 rng(4);
  check_gradients({std::make_shared<PyramidGradTransform>(2.5)}, rng);
}

TEST_CASE("filter bank gradient matches finite differences") {
  std::mt19937_64 rng(5);
  check_gradients({small_bank(rng)}, rng);
}

TEST_CASE("combined transforms gradient matches finite differences") {
  std::mt19937_64 rng(6);
  TransformSet ts = default_transforms(LossWeights{});
  ts.push_back(small_bank(rng));
  check_gradients(ts, rng);
}

TEST_CASE("pyramid features ignore constant offsets") {
  std::mt19937_64 rng(7);
  const Grid<Vec3> x = random_image(rng, 16, 16);
  Grid<Vec3> y = x;
  for (auto& v : y.data()) v += Vec3::Constant(0.05);
  const TransformSet ts = {std::make_shared<PyramidGradTransform>(1.0)};
  CHECK(perceptual_error(x, y, full_mask(16, 16), ts) < 1e-12);
}

TEST_CASE("filter bank loads from a pfm sheet") {
  const std::string dir = temp_dir("features");
  // Two 3x3 filters, a red delta and a green horizontal difference, each
  // followed by a rectifier.
  Grid<Vec3> sheet(6, 3, Vec3::Zero());
  sheet(1, 1) = Vec3(1, 0, 0);
  sheet(3 + 2, 1) = Vec3(0, 1, 0);
  sheet(3 + 0, 1) = Vec3(0, -1, 0);
  write_pfm(dir + "/bank.pfm", sheet);
  const auto bank = FilterBankTransform::load(dir + "/bank.pfm", 2.0);
  CHECK(bank->name() == "file");
  CHECK(bank->weight() == 2.0);

  std::mt19937_64 rng(8);
  const Grid<Vec3> x = random_image(rng, 8, 7);
  const Grid<Vec3> y = random_image(rng, 8, 7);
  double sum = 0;
  int n = 0;
  for (int j = 1; j < 6; ++j) {
    for (int i = 1; i < 7; ++i) {
      auto relu = [](double v) { return std::max(v, 0.0); };
      const double d0 = x(i, j).x() - y(i, j).x();
      const double d1 = relu(x(i + 1, j).y() - x(i - 1, j).y()) -
                        relu(y(i + 1, j).y() - y(i - 1, j).y());
      sum += d0 * d0 + d1 * d1;
      n += 2;
    }
  }
  CHECK(perceptual_error(x, y, full_mask(8, 7), {bank}) ==
        doctest::Approx(2.0 * std::sqrt(sum / n)).epsilon(1e-12));
  write_pfm(dir + "/bad.pfm", Grid<Vec3>(5, 3, Vec3::Zero()));
  CHECK_THROWS_AS(FilterBankTransform::load(dir + "/bad.pfm", 1.0), Error);
  CHECK_THROWS_AS(perceptual_error(x, y, Mask(8, 7, 0), {bank}), Error);
}
