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

#include "invrender/kernels.hpp"
#include "invrender/shlight.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace invrender {

namespace {
constexpr double kPi = std::numbers::pi;
}

EnvMap::EnvMap(Grid<Vec3> r) : radiance(std::move(r)) {
  if (radiance.height() < 1 || radiance.width() != 2 * radiance.height()) {
    throw Error("env map: width must be twice the height");
  }
  for (const auto& p : radiance.data()) {
    if (!p.allFinite()) throw Error("env map: non-finite texel");
    if ((p.array() < 0).any()) throw Error("env map: negative radiance");
  }
}

Vec3 env_direction(double theta, double phi) {
  return Vec3(std::sin(theta) * std::cos(phi), std::cos(theta),
              std::sin(theta) * std::sin(phi));
}

Vec3 env_texel_direction(int x, int y, int height) {
  const double theta = (y + 0.5) / height * kPi;
  const double phi = (x + 0.5) / (2.0 * height) * 2.0 * kPi;
  return env_direction(theta, phi);
}

namespace {

Vec3 sample_env(const EnvMap& env, const Vec3& d) {
  const int H = env.height();
  const int W = env.width();
  const double theta = std::acos(std::clamp(d.y(), -1.0, 1.0));
  double phi = std::atan2(d.z(), d.x());
  if (phi < 0) phi += 2 * kPi;
  const double fx = phi / (2 * kPi) * W - 0.5;
  const double fy = std::clamp(theta / kPi * H - 0.5, 0.0, H - 1.0);
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = std::min(static_cast<int>(std::floor(fy)), H - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  const int y1 = std::min(y0 + 1, H - 1);
  auto wrap = [W](int x) { return ((x % W) + W) % W; };
  const int xa = wrap(x0);
  const int xb = wrap(x0 + 1);
  return (1 - ay) * ((1 - ax) * env.radiance(xa, y0) + ax * env.radiance(xb, y0)) +
         ay * ((1 - ax) * env.radiance(xa, y1) + ax * env.radiance(xb, y1));
}

}  // namespace

EnvMap rotate_env(const EnvMap& env, const Mat3& R) {
  Grid<Vec3> out(env.width(), env.height());
  for (int y = 0; y < env.height(); ++y) {
    for (int x = 0; x < env.width(); ++x) {
      const Vec3 w = env_texel_direction(x, y, env.height());
      out(x, y) = sample_env(env, R.transpose() * w);
    }
  }
  return EnvMap(std::move(out));
}

// -----------------------------------------------------------------------------

PriorModel::PriorModel(const SHVector& mean, Eigen::MatrixXd Q,
                       Eigen::VectorXd sigma)
    : mean_(mean), Q_(std::move(Q)), sigma_(std::move(sigma)) {
  if (Q_.rows() != 27 || Q_.cols() != sigma_.size() || sigma_.size() < 1) {
    throw Error("prior: Q must be 27 x D with D sigmas");
  }
  const Eigen::MatrixXd gram = Q_.transpose() * Q_;
  if (!(gram - Eigen::MatrixXd::Identity(dim(), dim())).isZero(1e-9)) {
    throw Error("prior: Q columns are not orthonormal");
  }
  for (int k = 0; k < dim(); ++k) {
    if (!(sigma_[k] > 0) || (k > 0 && sigma_[k] > sigma_[k - 1])) {
      throw Error("prior: sigma must be positive and non-increasing");
    }
  }
  if (!mean_.allFinite()) throw Error("prior: non-finite mean");
  scaled_ = Q_ * sigma_.asDiagonal();
}

SHLighting PriorModel::reconstruct(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() != dim()) throw Error("prior: coefficient size mismatch");
  return SHLighting(scaled_ * coeffs + mean_);
}

Eigen::VectorXd PriorModel::project(const SHLighting& l) const {
  return (Q_.transpose() * (l.l - mean_)).cwiseQuotient(sigma_);
}

// -----------------------------------------------------------------------------

SHLighting sh_fit_envmap(const EnvMap& env) {
  const int H = env.height();
  const int W = env.width();
  if (H < 1) throw Error("sh_project_envmap: empty env map");
  const double texel = (kPi / H) * (2 * kPi / W);
  Eigen::Matrix<double, 9, 9> normal = Eigen::Matrix<double, 9, 9>::Zero();
  Eigen::Matrix<double, 9, 3> rhs = Eigen::Matrix<double, 9, 3>::Zero();
  double energy = 0.0;
  for (int y = 0; y < H; ++y) {
    const double w = std::sin((y + 0.5) / H * kPi) * texel;
    for (int x = 0; x < W; ++x) {
      const SHBasisRow b = kernels::basis(env_texel_direction(x, y, H));
      const Vec3& L = env.radiance(x, y);
      normal.noalias() += w * b * b.transpose();
      rhs.noalias() += w * b * L.transpose();
      energy += L.sum();
    }
  }
  if (!(energy > 0)) throw Error("sh_project_envmap: zero-energy env map");
  const Eigen::Matrix<double, 9, 3> coeffs = normal.ldlt().solve(rhs);
  SHLighting out;
  for (int c = 0; c < 3; ++c) out.channel(c) = coeffs.col(c);
  return out;
}

SHLighting sh_project_envmap(const EnvMap& env) {
  return normalize_lighting(sh_fit_envmap(env));
}

SHLighting normalize_lighting(const SHLighting& l) {
  const double n = l.l.norm();
  if (!(n > 0) || !std::isfinite(n)) throw Error("normalize_lighting: zero vector");
  return SHLighting(l.l / n);
}

Mat3 augmentation_rotation(double azimuth, double pitch, double roll) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(azimuth, Vec3::UnitY()) * AngleAxisd(pitch, Vec3::UnitX()) *
          AngleAxisd(roll, Vec3::UnitZ()))
      .toRotationMatrix();
}

namespace {

const std::vector<SHRotation>& augmentation_grid() {
  static const std::vector<SHRotation> grid = [] {
    constexpr std::array<int, kTiltSteps> tilts{0, -3, -2, -1, 1, 2, 3};
    const double step = kPi / 18.0;
    std::vector<SHRotation> g;
    g.reserve(kAugmentationsPerEnv);
    for (int a = 0; a < kAzimuthSteps; ++a) {
      for (int p : tilts) {
        for (int r : tilts) {
          g.emplace_back(augmentation_rotation(a * step, p * step, r * step));
        }
      }
    }
    return g;
  }();
  return grid;
}

}  // namespace

std::vector<SHLighting> augment_rotations(const SHLighting& l) {
  const double norm = l.l.norm();
  std::vector<SHLighting> out;
  out.reserve(kAugmentationsPerEnv);
  for (const SHRotation& M : augmentation_grid()) {
    SHVector v = M.apply(l.l);
    // The basis is not orthonormal, so M does not preserve the norm.
    const double vn = v.norm();
    if (vn > 0) v *= norm / vn;
    out.emplace_back(v);
  }
  return out;
}

PriorModel build_prior(const std::vector<SHLighting>& samples, int dim) {
  const auto N = static_cast<std::ptrdiff_t>(samples.size());
  if (dim < 1 || dim > 27) throw Error("build_prior: dimension must be in [1, 27]");
  if (N < dim + 1) throw Error("build_prior: need at least D + 1 samples");

  SHVector mean = SHVector::Zero();
  for (const auto& s : samples) mean += s.l;
  mean /= static_cast<double>(N);

  // Chunked accumulation; chunks are summed in order so the result does not
  // depend on the thread count.
  constexpr std::ptrdiff_t kChunk = 4096;
  const std::ptrdiff_t chunks = (N + kChunk - 1) / kChunk;
  using Cov = Eigen::Matrix<double, 27, 27>;
  std::vector<Cov> partial(chunks, Cov::Zero());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::ptrdiff_t end = std::min(N, (c + 1) * kChunk);
    for (std::ptrdiff_t i = c * kChunk; i < end; ++i) {
      const SHVector d = samples[i].l - mean;
      partial[c].noalias() += d * d.transpose();
    }
  }
  Cov cov = Cov::Zero();
  for (const auto& p : partial) cov += p;
  cov /= static_cast<double>(N - 1);

  Eigen::SelfAdjointEigenSolver<Cov> eig(cov);
  const auto& lambda = eig.eigenvalues();  // ascending
  const double top = std::max(lambda[26], 0.0);
  int rank = 0;
  for (int k = 0; k < 27; ++k) rank += lambda[k] > 1e-12 * top && lambda[k] > 0;
  if (rank < dim) {
    throw Error("build_prior: sample covariance has rank " + std::to_string(rank) +
                ", below D = " + std::to_string(dim));
  }
  Eigen::MatrixXd Q(27, dim);
  Eigen::VectorXd sigma(dim);
  for (int k = 0; k < dim; ++k) {
    Eigen::VectorXd q = eig.eigenvectors().col(26 - k);
    Eigen::Index arg;
    q.cwiseAbs().maxCoeff(&arg);
    if (q[arg] < 0) q = -q;
    Q.col(k) = q;
    sigma[k] = std::sqrt(lambda[26 - k]);
  }
  return PriorModel(mean, std::move(Q), std::move(sigma));
}

double prior_loss(const Eigen::VectorXd& coeffs) { return coeffs.squaredNorm(); }

Eigen::VectorXd prior_loss_gradient(const Eigen::VectorXd& coeffs) {
  return 2.0 * coeffs;
}

}  // namespace invrender
