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

// Procedural outdoor data with ground truth: sky panoramas for the
// illumination prior and ray-cast terrain-and-boxes scenes.

#pragma once

#include "invrender/core.hpp"
#include "invrender/prior.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace invrender {

/// Equirectangular sky with a sun lobe and a dark ground hemisphere.
EnvMap procedural_sky(std::uint64_t seed, int height = 32);

inline constexpr int kDefaultEnvCount = 79;

/// Skies for seeds 0 .. count-1.
std::vector<EnvMap> default_env_maps(int count = kDefaultEnvCount);

/// Unit-norm SH fits of the maps, each expanded by the augmentation grid.
std::vector<SHLighting> augmented_samples(const std::vector<EnvMap>& envs);

/// Prior built from the default skies. Computed once per process.
const PriorModel& default_prior();

/// von Mises-Fisher sample around a unit mean.
Vec3 sample_vmf(const Vec3& mean, double kappa, std::mt19937_64& rng);

/// Concentration for a nominal angular noise level.
double vmf_kappa(double sigma_degrees);

struct SyntheticConfig {
  int width = 64;
  int height = 64;
  std::uint64_t seed = 1;
  double guide_noise_deg = 10.0;
  /// Amplitude of the terrain undulation; zero gives a flat ground plane.
  double terrain_amplitude = 0.12;
  int box_count = 3;
  int views = 1;
  /// Per-channel illumination gain of the second view.
  Vec3 second_view_tint = Vec3::Ones();
};

struct SyntheticView {
  ImageRGB image;  // gamma encoded, 8-bit quantized values
  Mask foreground;
  Mask ground;
  DepthMap depth;  // NaN where nothing is hit
  Camera camera;
  AlbedoMap albedo;
  ShadowMap shadow;
  NormalMap normals;
  NormalMap guide;
  SHLighting light;
};

struct SyntheticScene {
  std::vector<SyntheticView> views;
  Eigen::VectorXd light_coeffs;  // prior coefficients of the first view
  double guide_noise_deg = 0;
};

SyntheticScene make_synthetic(const SyntheticConfig& config, const PriorModel& prior);

}  // namespace invrender
