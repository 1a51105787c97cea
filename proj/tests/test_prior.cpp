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

#include "invrender/prior.hpp"

#include "invrender/shlight.hpp"
#include "invrender/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

using namespace invrender;
using namespace invrender::testing;

namespace {

// Env map whose radiance is an order-2 SH function plus a constant that
// keeps it positive.
EnvMap sh_env(const SHVector& l, int H) {
  Grid<Vec3> r(2 * H, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < 2 * H; ++x) {
      r(x, y) = oracle_shade(env_texel_direction(x, y, H), l);
    }
  }
  return EnvMap(std::move(r));
}

SHVector positive_light(std::mt19937_64& rng) {
  SHVector l = 0.2 * random_light(rng);
  for (int c = 0; c < 3; ++c) l[9 * c] = 2.0;
  return l;
}

}  // namespace

TEST_CASE("env map directions") {
  CHECK((env_direction(0, 0) - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((env_direction(std::numbers::pi / 2, 0) - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((env_direction(std::numbers::pi / 2, std::numbers::pi / 2) - Vec3(0, 0, 1)).norm() <
        1e-15);
  const Vec3 d = env_texel_direction(0, 0, 16);
  CHECK(d.y() > 0.99);
  CHECK_THROWS_AS(EnvMap(Grid<Vec3>(10, 10, Vec3::Ones())), Error);
  CHECK_THROWS_AS(EnvMap(Grid<Vec3>(8, 4, Vec3(-1, 0, 0))), Error);
}

TEST_CASE("constant env map projects to DC only") {
  const EnvMap env(Grid<Vec3>(64, 32, Vec3(0.3, 0.5, 0.7)));
  const SHLighting l = sh_fit_envmap(env);
  for (int c = 0; c < 3; ++c) {
    CHECK(l.l[9 * c] == doctest::Approx(Vec3(0.3, 0.5, 0.7)[c]).epsilon(1e-12));
    CHECK(l.channel(c).tail<8>().norm() < 1e-12);
  }
  const SHLighting n = sh_project_envmap(env);
  CHECK(n.l.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(sh_fit_envmap(EnvMap(Grid<Vec3>(8, 4, Vec3::Zero()))), Error);
}

TEST_CASE("sh env map fit recovers the generating coefficients") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const SHVector l = positive_light(rng);
    const SHLighting fit = sh_fit_envmap(sh_env(l, 24));
    CHECK((fit.l - l).norm() < 1e-10);
  }
}

TEST_CASE("rotating an env map matches rotating its coefficients") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const SHVector l = positive_light(rng);
    const Mat3 R = random_rotation(rng);
    const EnvMap env = sh_env(l, 64);
    const SHVector a = sh_fit_envmap(rotate_env(env, R)).l;
    const SHVector b = SHRotation(R).apply(l);
    // Bilinear resampling of the texels is the only error source.
    CHECK((a - b).norm() / b.norm() < 2e-3);
  }
}

TEST_CASE("augmentation grid") {
  CHECK(kAugmentationsPerEnv == 1764);
  std::mt19937_64 rng(3);
  const SHLighting l(random_light(rng));
  const auto aug = augment_rotations(l);
  REQUIRE(aug.size() == 1764);
  CHECK((aug[0].l - l.l).norm() < 1e-12);
  for (const auto& a : aug) CHECK(a.l.norm() == doctest::Approx(l.l.norm()).epsilon(1e-12));
  // Azimuth steps rotate about the vertical axis.
  const Mat3 R = augmentation_rotation(0.3, 0, 0);
  CHECK((R * Vec3::UnitY() - Vec3::UnitY()).norm() < 1e-15);
  // Index layout: azimuth-major, 49 tilt combinations per azimuth.
  SHVector expect = SHRotation(augmentation_rotation(std::numbers::pi / 18, 0, 0)).apply(l.l);
  expect *= l.l.norm() / expect.norm();
  CHECK((aug[49].l - expect).norm() < 1e-12);
}

TEST_CASE("pca prior matches an SVD of the centred samples") {
  std::mt19937_64 rng(4);
  const int N = 500;
  Eigen::MatrixXd basis = Eigen::MatrixXd::Random(27, 27);
  std::vector<SHLighting> samples;
  Eigen::MatrixXd X(N, 27);
  for (int i = 0; i < N; ++i) {
    SHVector v;
    for (int k = 0; k < 27; ++k) v[k] = uniform(rng, -1, 1) * std::pow(0.7, k);
    v = basis * v;
    samples.emplace_back(v);
    X.row(i) = v.transpose();
  }
  const PriorModel p = build_prior(samples, 6);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  Eigen::MatrixXd C = X.rowwise() - mu;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinV);
  CHECK((p.mean() - mu.transpose()).norm() < 1e-12);
  for (int k = 0; k < 6; ++k) {
    CHECK(p.sigma()[k] == doctest::Approx(svd.singularValues()[k] / std::sqrt(N - 1.0)).epsilon(1e-9));
    CHECK(std::abs(p.basis().col(k).dot(svd.matrixV().col(k))) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK((p.basis().transpose() * p.basis() - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-12);
  CHECK((p.scaled_basis() - p.basis() * p.sigma().asDiagonal()).norm() < 1e-15);
}

TEST_CASE("reconstruct and project are inverse on the subspace") {
  std::mt19937_64 rng(5);
  const PriorModel p = random_prior(rng, 10);
  Eigen::VectorXd a(10);
  for (int k = 0; k < 10; ++k) a[k] = uniform(rng, -3, 3);
  CHECK((p.project(p.reconstruct(a)) - a).norm() < 1e-12);
  CHECK((p.reconstruct(Eigen::VectorXd::Zero(10)).l - p.mean()).norm() == 0.0);
  CHECK_THROWS_AS(p.reconstruct(Eigen::VectorXd::Zero(3)), Error);
  CHECK(prior_loss(a) == doctest::Approx(a.squaredNorm()));
  CHECK((prior_loss_gradient(a) - 2 * a).norm() == 0.0);
}

TEST_CASE("prior construction rejects bad inputs") {
  std::vector<SHLighting> few(5, SHLighting(SHVector::Ones()));
  CHECK_THROWS_AS(build_prior(few, 18), Error);
  std::vector<SHLighting> flat;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    SHVector v = SHVector::Zero();
    v[0] = uniform(rng);
    v[1] = uniform(rng);
    flat.emplace_back(v);
  }
  CHECK_THROWS_AS(build_prior(flat, 3), Error);
  CHECK_NOTHROW(build_prior(flat, 2));
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(27, 2);
  CHECK_THROWS_AS(PriorModel(SHVector::Zero(), 2 * Q, Eigen::Vector2d(1, 0.5)), Error);
  CHECK_THROWS_AS(PriorModel(SHVector::Zero(), Q, Eigen::Vector2d(0.5, 1)), Error);
  CHECK_THROWS_AS(normalize_lighting(SHLighting()), Error);
}

TEST_CASE("default prior") {
  const auto envs = default_env_maps();
  CHECK(envs.size() == 79);
  const PriorModel& p = default_prior();
  CHECK(p.dim() == 18);
  CHECK((p.basis().transpose() * p.basis() - Eigen::MatrixXd::Identity(18, 18)).norm() < 1e-10);
  // Skies light the scene from above on average.
  const SHVector& m = p.mean();
  for (int c = 0; c < 3; ++c) CHECK(m[9 * c + 2] > 0);
  CHECK(&default_prior() == &p);
}
