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

// Inverse-rendering objective. Per view:
//
//   w1 appearance + w2 normal + w3 albedo + w4 cross-rendering + w5 lighting
//
// where the albedo and cross-rendering terms are averaged over the pair
// links that target the view. A multi-view problem minimizes the mean of
// the per-view objectives. All gradients are analytic.

#pragma once

#include "invrender/core.hpp"
#include "invrender/features.hpp"
#include "invrender/geometry.hpp"
#include "invrender/prior.hpp"
#include "invrender/shlight.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace invrender {

/// Fixed observations for one view.
struct ViewInputs {
  Grid<Vec3> linear_image;  // i_obs^gamma
  Mask foreground;
  std::optional<NormalMap> guide;

  int width() const { return linear_image.width(); }
  int height() const { return linear_image.height(); }

  /// Linearizes a gamma-encoded observation.
  static ViewInputs make(const ImageRGB& image, Mask foreground,
                         std::optional<NormalMap> guide = std::nullopt);
};

/// Free parameters of one view. Albedo and shadow are squashed through
/// (tanh + 1) / 2, the shadow additionally mapped onto [s_min, 1].
struct Parameters {
  Grid<Vec3> albedo_raw;
  Grid<double> shadow_raw;
  NormalParams normal_params;
  Eigen::VectorXd lighting;  // prior coefficients

  static Parameters zeros(int width, int height, int prior_dim);
  std::size_t size() const;
  /// Albedo, shadow, normal params, lighting, in that order.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> v);
};

double squash(double raw);
double squash_derivative(double raw);
double unsquash(double value);
double shadow_from_raw(double raw);
double shadow_raw_from(double shadow);

struct DecodedView {
  AlbedoMap albedo;
  ShadowMap shadow;
  Grid<Vec3> normals;
  SHLighting light;
};

DecodedView decode(const Parameters& params, const PriorModel& prior);
NormalMap decoded_normal_map(const DecodedView& d, const Mask& mask);

struct EnergyState {
  std::shared_ptr<const ViewInputs> inputs;
  Parameters params;
};

/// Quantities of `source` resampled onto `target` pixels.
struct PairLink {
  int target = 0;
  int source = 1;
  /// Built from the target depth and both cameras; source validity is the
  /// source foreground with defined depth.
  Resampler resampler;
  /// Linear source observation cross-projected onto the target (possibly
  /// resampled at a higher resolution and downsampled).
  Grid<Vec3> projected_image;
  Mask projected_image_valid;
  /// Rotates source-camera lighting into the target camera frame.
  SHRotation rotation;
};

struct PairGeometry {
  DepthMap depth;
  Camera camera;
};

/// Link from view `source` to view `target` at a single resolution.
PairLink make_pair_link(int target, int source, const ViewInputs& target_view,
                        const PairGeometry& target_geo, const ViewInputs& source_view,
                        const PairGeometry& source_geo);

struct Problem {
  std::vector<std::shared_ptr<const ViewInputs>> views;
  std::vector<PairLink> links;
  std::shared_ptr<const PriorModel> prior;
  TransformSet transforms;
  LossWeights weights;
};

struct LossBreakdown {
  double appearance = 0;
  double nm = 0;
  double albedo = 0;
  double cross_rend = 0;
  double lighting = 0;
  double total = 0;
  bool has_nm = false;
  bool has_albedo = false;
  bool has_cross_rend = false;
  LossWeights weights;

  nlohmann::json to_json() const;
};

struct EnergyEval {
  double total = 0;
  std::vector<LossBreakdown> per_view;
  std::vector<Parameters> gradient;  // empty unless requested
};

EnergyEval evaluate(const Problem& problem, std::span<const Parameters> params,
                    bool with_gradient);

// Individual terms on decoded quantities.

/// min(1, i_lin / s) per channel.
Grid<Vec3> shadow_free(const Grid<Vec3>& linear_image, const ShadowMap& shadow);
ImageRGB shadow_free(const ImageRGB& image, const ShadowMap& shadow);

/// Angle clamp used by the normal loss.
inline constexpr double kAngleClamp = 1e-7;

/// Mean over jointly valid pixels of arccos(n_g . n_e), clamped. Optional
/// gradient with respect to the estimated normal vectors.
double normal_supervision_loss(const NormalMap& est, const NormalMap& guide,
                               Grid<Vec3>* grad = nullptr, double scale = 1.0);

double appearance_loss(const EnergyState& state, const PriorModel& prior,
                       const TransformSet& transforms);

double albedo_consistency_loss(const AlbedoMap& albedo_target,
                               const AlbedoMap& albedo_source, const PairLink& link,
                               const Mask& target_foreground,
                               const TransformSet& transforms);

double cross_render_loss(const EnergyState& target, const ShadowMap& source_shadow,
                         const SHLighting& source_light, const PairLink& link,
                         const PriorModel& prior, const TransformSet& transforms);

/// Objective of one view of a problem, including links that target it.
LossBreakdown total_loss(const Problem& problem, std::span<const Parameters> params,
                         int view);

}  // namespace invrender
