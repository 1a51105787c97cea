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

// Two-stage Adam optimizer over per-pixel albedo, shadow, normal parameters
// and prior-subspace lighting.
//
// Stage 1 holds the normals at the guide and re-solves lighting in closed
// form. Stage 2 frees everything.

#pragma once

#include "invrender/energy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace invrender {

struct SolveConfig {
  int stage1_iters = 300;
  int stage2_iters = 1200;
  double step = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int resolve_period = 10;
  /// Stage 2 lighting: closed-form re-solve (true) or gradient steps (false).
  bool resolve_in_stage2 = true;
  bool deterministic = false;
  std::uint64_t seed = 0;
  /// A stage ends once the relative energy change over `window` iterations
  /// falls below this.
  double tolerance = 1e-6;
  int window = 50;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static SolveConfig from_json(const nlohmann::json& j);
};

struct TraceEntry {
  int stage = 0;  // 0 = initial state
  int iteration = 0;
  double total = 0;
  std::vector<LossBreakdown> per_view;
};

struct ViewResult {
  DecodedView decoded;
  Parameters params;
};

struct SolveReport {
  std::vector<TraceEntry> trace;
  std::vector<ViewResult> views;
  bool stage1_skipped = false;
  int lighting_resolves = 0;
  int degenerate_resolves = 0;
  /// Re-solves that increased the RGB least-squares residual.
  int resolve_regressions = 0;
  int stage1_iterations = 0;
  int stage2_iterations = 0;
  double wall_seconds = 0;
  std::vector<std::string> warnings;

  double final_energy() const { return trace.back().total; }
  nlohmann::json to_json() const;
};

/// Initial parameters for one view. Albedo is the shadow-free image over
/// the DC render of the prior mean, normals come from the guide.
Parameters init_state(const ViewInputs& view, const PriorModel& prior);

/// Initial albedo and shadow values are capped below one so the squashed
/// parameters stay off the tanh plateau.
inline constexpr double kInitCap = 0.95;

/// RGB least-squares residual norm of the current lighting on one view.
double rgb_residual(const ViewInputs& view, const DecodedView& d);

SolveReport solve(const Problem& problem, std::vector<Parameters> params,
                  const SolveConfig& config);

/// Joint solve of two views linked in both directions.
SolveReport solve_pair(std::shared_ptr<const ViewInputs> a, const PairGeometry& ga,
                       std::shared_ptr<const ViewInputs> b, const PairGeometry& gb,
                       std::shared_ptr<const PriorModel> prior,
                       const TransformSet& transforms, const LossWeights& weights,
                       const SolveConfig& config);

}  // namespace invrender
