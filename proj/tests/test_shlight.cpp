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
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

using namespace invrender;
using namespace invrender::testing;

namespace {

struct Scene {
  AlbedoMap albedo;
  ShadowMap shadow;
  NormalMap normals;
  Mask mask;
};

Scene random_scene(std::mt19937_64& rng, int W, int H) {
  Scene s{AlbedoMap(W, H), ShadowMap(W, H), NormalMap(W, H), Mask(W, H, 1)};
  Grid<Vec3> n(W, H);
  for (int i = 0; i < W * H; ++i) {
    s.albedo[i] = Vec3(uniform(rng, 0.1, 1), uniform(rng, 0.1, 1), uniform(rng, 0.1, 1));
    s.shadow[i] = uniform(rng, 0.3, 1);
    n[i] = random_front_normal(rng, 0.05);
  }
  s.normals = NormalMap(n, s.mask);
  return s;
}

// Least squares through a complete orthogonal decomposition of the
// explicitly assembled per-pixel system.
SHVector oracle_lighting(const Grid<Vec3>& target, const Scene& s) {
  const int N = static_cast<int>(target.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * N, 27);
  Eigen::VectorXd y(3 * N);
  for (int i = 0; i < N; ++i) {
    const auto b = oracle_basis(s.normals.normals[i]);
    for (int c = 0; c < 3; ++c) {
      A.block(3 * i + c, 9 * c, 1, 9) = (s.albedo[i][c] * s.shadow[i]) * b.transpose();
      y[3 * i + c] = target[i][c];
    }
  }
  return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(y);
}

Grid<Vec3> signed_render(const Scene& s, const SHVector& l) {
  Grid<Vec3> out(s.albedo.width(), s.albedo.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = s.albedo[i].cwiseProduct(oracle_shade(s.normals.normals[i], l)) * s.shadow[i];
  }
  return out;
}

}  // namespace

TEST_CASE("sh basis terms") {
  const SHBasisRow up = sh_basis(Vec3(0, 0, 1));
  Eigen::Matrix<double, 9, 1> expect;
  expect << 1, 0, 0, 1, 2, 0, 0, 0, 0;
  CHECK((up - expect).norm() == 0.0);
  const double r = 1.0 / std::sqrt(2.0);
  const SHBasisRow d = sh_basis(Vec3(r, 0, r));
  CHECK(d[6] == doctest::Approx(0.5));
  CHECK(d[8] == doctest::Approx(0.5));
  CHECK(d[4] == doctest::Approx(0.5));
  CHECK_THROWS_AS(sh_basis(Vec3(1, 1, 0)), Error);
}

TEST_CASE("render matches the per-pixel oracle and clamps at zero") {
  std::mt19937_64 rng(2);
  const Scene s = random_scene(rng, 6, 5);
  const SHLighting l(random_light(rng));
  const ImageRGB img = render(s.albedo, s.shadow, s.normals, l, s.mask);
  const Grid<Vec3> ref = signed_render(s, l.l);
  const Grid<Vec3> sgn = render_signed(s.albedo, s.shadow, s.normals, l, s.mask);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK((img.pixels[i] - ref[i].cwiseMax(0.0)).norm() < 1e-14);
    CHECK((sgn[i] - ref[i]).norm() < 1e-14);
  }
  CHECK(img.encoding == Encoding::linear);
}

TEST_CASE("constant lighting on white albedo gives a flat image") {
  const int W = 4, H = 4;
  Grid<Vec3> n(W, H);
  std::mt19937_64 rng(1);
  for (auto& v : n.data()) v = random_front_normal(rng);
  SHVector l = SHVector::Zero();
  l[0] = 0.2;
  l[9] = 0.4;
  l[18] = 0.6;
  const ImageRGB img = render(AlbedoMap(W, H, Vec3::Ones()), ShadowMap(W, H, 1.0),
                              NormalMap(n, full_mask(W, H)), SHLighting(l), full_mask(W, H));
  for (const auto& p : img.pixels.data()) CHECK((p - Vec3(0.2, 0.4, 0.6)).norm() < 1e-15);
}

TEST_CASE("lighting solve recovers generating lighting") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Scene s = random_scene(rng, 12, 12);
    const SHVector l = random_light(rng);
    const Grid<Vec3> target = signed_render(s, l);
    const LightingSolve sol =
        solve_lighting_linear(target, s.albedo, s.shadow, s.normals.normals, s.mask);
    CHECK_FALSE(sol.degenerate);
    CHECK(sol.rank == 27);
    CHECK((sol.light.l - l).norm() / l.norm() < 1e-8);
    CHECK((sol.light.l - oracle_lighting(target, s)).norm() < 1e-9);
  }
}

TEST_CASE("gamma image lighting solve linearizes its input") {
  std::mt19937_64 rng(8);
  Scene s = random_scene(rng, 10, 10);
  SHVector l = SHVector::Zero();
  for (int c = 0; c < 3; ++c) {
    l[9 * c] = 0.5;
    l[9 * c + 3] = 0.3;
  }
  const Grid<Vec3> lin = signed_render(s, l);
  Grid<Vec3> enc(10, 10);
  for (std::size_t i = 0; i < enc.size(); ++i) {
    for (int c = 0; c < 3; ++c) enc[i][c] = std::pow(lin[i][c], 1.0 / kGamma);
  }
  const LightingSolve sol = solve_lighting(ImageRGB(enc, Encoding::srgb_gamma), s.albedo,
                                           s.shadow, s.normals, s.mask);
  CHECK((sol.light.l - l).norm() < 1e-9);
}

TEST_CASE("least squares residual of a noisy target matches the oracle") {
  std::mt19937_64 rng(9);
  const Scene s = random_scene(rng, 10, 10);
  Grid<Vec3> target = signed_render(s, random_light(rng));
  for (auto& p : target.data()) p += Vec3(uniform(rng, -0.1, 0.1), 0, uniform(rng, -0.1, 0.1));
  const LightingSolve sol =
      solve_lighting_linear(target, s.albedo, s.shadow, s.normals.normals, s.mask);
  const SHVector ref = oracle_lighting(target, s);
  CHECK((sol.light.l - ref).norm() < 1e-9);
  const Grid<Vec3> fit = signed_render(s, ref);
  double r2 = 0;
  for (std::size_t i = 0; i < fit.size(); ++i) r2 += (fit[i] - target[i]).squaredNorm();
  CHECK(sol.residual == doctest::Approx(std::sqrt(r2)).epsilon(1e-9));
}

TEST_CASE("identical normals make the solve degenerate") {
  const int W = 6, H = 6;
  Grid<Vec3> n(W, H, Vec3(0, 0, 1));
  const Mask m = full_mask(W, H);
  Grid<Vec3> target(W, H, Vec3(0.5, 0.5, 0.5));
  const LightingSolve sol = solve_lighting_linear(target, AlbedoMap(W, H, Vec3::Ones()),
                                                  ShadowMap(W, H, 1.0), n, m);
  CHECK(sol.degenerate);
  CHECK(sol.rank < 27);
  CHECK(sol.light.l.allFinite());
  // Minimum-norm solution still reproduces the target.
  CHECK(kernels::shade(Vec3(0, 0, 1), sol.light.l).isApprox(Vec3::Constant(0.5), 1e-9));
}

TEST_CASE("too few pixels is an error") {
  Grid<Vec3> n(5, 5, Vec3(0, 0, 1));
  Mask m(5, 5, 0);
  for (int i = 0; i < 20; ++i) m[i] = 1;
  CHECK_THROWS_AS(solve_lighting_linear(Grid<Vec3>(5, 5, Vec3::Zero()),
                                        AlbedoMap(5, 5, Vec3::Ones()), ShadowMap(5, 5, 1.0),
                                        n, m),
                  Error);
}

TEST_CASE("prior subspace solve recovers generating coefficients") {
  std::mt19937_64 rng(10);
  const PriorModel prior = random_prior(rng, 18);
  for (int trial = 0; trial < 10; ++trial) {
    const Scene s = random_scene(rng, 10, 10);
    Eigen::VectorXd a(18);
    for (int k = 0; k < 18; ++k) a[k] = uniform(rng, -2, 2);
    const Grid<Vec3> target = signed_render(s, prior.reconstruct(a).l);
    const PriorLightingSolve sol = solve_lighting_in_prior_linear(
        target, s.albedo, s.shadow, s.normals.normals, s.mask, prior);
    CHECK_FALSE(sol.degenerate);
    CHECK((sol.coeffs - a).norm() / a.norm() < 1e-8);
  }
}

TEST_CASE("lighting solve vjp matches finite differences") {
  std::mt19937_64 rng(13);
  const int W = 6, H = 6;
  Scene s = random_scene(rng, W, H);
  Grid<Vec3> target = signed_render(s, random_light(rng));
  for (auto& p : target.data()) p += Vec3::Constant(uniform(rng, -0.05, 0.05));
  SHVector g;
  for (int k = 0; k < 27; ++k) g[k] = uniform(rng, -1, 1);
  Grid<Vec3> normals = s.normals.normals;
  auto f = [&](const AlbedoMap& a, const ShadowMap& sh, const Grid<Vec3>& n) {
    return g.dot(solve_lighting_linear(target, a, sh, n, s.mask).light.l);
  };
  const LightingSolveGrad grad = solve_lighting_vjp(target, s.albedo, s.shadow, normals, s.mask, g);
  const double h = 1e-6;
  for (int i : {0, 7, 20, 35}) {
    for (int c = 0; c < 3; ++c) {
      AlbedoMap ap = s.albedo, am = s.albedo;
      ap[i][c] += h;
      am[i][c] -= h;
      const double fd = (f(ap, s.shadow, normals) - f(am, s.shadow, normals)) / (2 * h);
      CHECK(rel_error(fd, grad.albedo[i][c]) < 1e-5);
      Grid<Vec3> np = normals, nm = normals;
      np[i][c] += h;
      nm[i][c] -= h;
      const double fdn = (f(s.albedo, s.shadow, np) - f(s.albedo, s.shadow, nm)) / (2 * h);
      CHECK(rel_error(fdn, grad.normal[i][c]) < 1e-5);
    }
    ShadowMap sp = s.shadow, sm = s.shadow;
    sp[i] += h;
    sm[i] -= h;
    const double fds = (f(s.albedo, sp, normals) - f(s.albedo, sm, normals)) / (2 * h);
    CHECK(rel_error(fds, grad.shadow[i]) < 1e-5);
  }
}

TEST_CASE("sh rotation equivariance, identity and composition") {
  std::mt19937_64 rng(14);
  const SHRotation I(Mat3::Identity());
  CHECK((I.block() - SHRotation::Block::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 R = random_rotation(rng);
    const Vec3 w = random_unit(rng);
    const SHVector l = random_light(rng);
    const SHRotation M(R);
    const Vec3 lhs = oracle_shade(w, M.apply(l));
    const Vec3 rhs = oracle_shade(R.transpose() * w, l);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    const Mat3 R2 = random_rotation(rng);
    const SHRotation M12(R * R2);
    CHECK(((M * SHRotation(R2)).block() - M12.block()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((M.apply_transpose(l) - M.full().transpose() * l).norm() < 1e-12);
  }
  CHECK_THROWS_AS(sh_rotation(2.0 * Mat3::Identity()), Error);
  Mat3 reflect = Mat3::Identity();
  reflect(0, 0) = -1;
  CHECK_THROWS_AS(sh_rotation(reflect), Error);
}

TEST_CASE("rotating about y by pi mirrors the hemisphere when z-odd terms vanish") {
  std::mt19937_64 rng(15);
  SHVector l = random_light(rng);
  for (int c = 0; c < 3; ++c) {
    l[9 * c + 3] = 0;  // z
    l[9 * c + 6] = 0;  // xz
    l[9 * c + 7] = 0;  // yz
  }
  const Mat3 Ry = Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitY()).toRotationMatrix();
  const int R = 32;
  const ImageRGB a = render_hemisphere(SHLighting(l), R);
  const ImageRGB b = render_hemisphere(SHRotation(Ry).apply(SHLighting(l)), R);
  for (int y = 0; y < R; ++y) {
    for (int x = 0; x < R; ++x) {
      CHECK((b.pixels(x, y) - a.pixels(R - 1 - x, y)).norm() < 1e-10);
    }
  }
}

TEST_CASE("hemisphere render geometry") {
  const Mask m = hemisphere_mask(64);
  CHECK(m(32, 32) == 1);
  CHECK(m(0, 0) == 0);
  CHECK_THROWS_AS(render_hemisphere(SHLighting(), 8), Error);
  SHVector l = SHVector::Zero();
  l[3] = 1;  // red follows n_z
  const ImageRGB img = render_hemisphere(SHLighting(l), 64);
  Vec3 n;
  REQUIRE(hemisphere_normal(10, 40, 64, n));
  CHECK(img.pixels(10, 40)[0] == doctest::Approx(n.z()));
  CHECK(img.pixels(0, 0).norm() == 0.0);
}
