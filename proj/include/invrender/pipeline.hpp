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

// Data loading, cropping, pair selection and evaluation metrics.

#pragma once

#include "invrender/core.hpp"
#include "invrender/geometry.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace invrender {

/// On-disk description of one calibrated view. Paths are resolved relative
/// to the directory of the record file when loaded through `load_records`.
struct ViewRecord {
  std::string image;
  Camera camera;
  std::string depth;
  std::string sky_mask;            // nonzero = sky
  std::optional<std::string> ground_mask;
  std::optional<std::string> guide_normals;

  static ViewRecord from_json(const nlohmann::json& j, const std::string& base_dir = "");
  nlohmann::json to_json() const;
};

/// A JSON array of records, or an object with a "views" array.
std::vector<ViewRecord> load_records(const std::string& path);

struct LoadedView {
  ImageRGB image;
  Camera camera;
  DepthMap depth;
  Mask foreground;  // not sky
  std::optional<Mask> ground;
  std::optional<NormalMap> guide;
};

LoadedView load_view(const ViewRecord& record);

// --- preprocessing ---------------------------------------------------------

struct Crop {
  ImageRGB image;
  DepthMap depth;
  Camera camera;
  double scale = 1;
  int offset_x = 0;
  int offset_y = 0;
};

struct PreprocessOptions {
  int size = 200;
  /// Crops with fewer valid-depth pixels than this fraction are dropped.
  double min_valid_fraction = 0.25;
};

/// Scales the image so its smaller side equals `size`, then greedily places
/// non-overlapping square crops by valid-depth count. Crop k maps source
/// pixel (x, y) to (s x - ox, s y - oy).
std::vector<Crop> preprocess(const ImageRGB& image, const DepthMap& depth,
                             const Camera& camera,
                             const PreprocessOptions& options = {});

Camera scale_camera(const Camera& cam, double s);
Camera crop_camera(const Camera& cam, int offset_x, int offset_y);

// --- pair selection ----------------------------------------------------------

struct PairThresholds {
  /// Camera distance gate, as a multiple of the median pairwise distance.
  double camera_factor = 2.0;
  /// Centroid gate, as a multiple of a quarter of the scene diameter.
  double centroid_factor = 1.0;
  /// Optional absolute camera distance limit.
  std::optional<double> max_camera_distance;
  double r_max = 0.9;
  int bins = 64;
};

struct PairView {
  Grid<Vec3> linear_image;
  Mask foreground;
  DepthMap depth;
  Camera camera;
};

/// Pearson correlation of grayscale histograms of view i and view j
/// cross-projected into i, over jointly valid pixels.
double histogram_correlation(const PairView& i, const PairView& j, int bins = 64);

/// Ordered pairs; (i, j) is present exactly when (j, i) is.
std::vector<std::pair<int, int>> select_pairs(const std::vector<PairView>& views,
                                              const PairThresholds& thresholds = {});

// --- guide normals -----------------------------------------------------------

NormalMap guide_normals(const DepthMap& depth, const Camera& camera,
                        const std::optional<Mask>& ground,
                        const std::optional<GroundPlane>& plane);

// --- metrics -----------------------------------------------------------------

struct AlbedoError {
  double mse = 0;
  double lmse = 0;
  int lmse_windows = 0;
};

AlbedoError albedo_error(const AlbedoMap& pred, const AlbedoMap& ref, const Mask& mask);

struct NormalError {
  double mean_deg = 0;
  double median_deg = 0;
};

NormalError normal_error(const NormalMap& pred, const NormalMap& ref);

enum class LightingScale { global, per_colour };

inline constexpr int kHemisphereResolution = 64;

double lighting_error(const SHLighting& pred, const SHLighting& ref, LightingScale mode);

/// Masked mean squared difference of two linear images.
double reconstruction_error(const Grid<Vec3>& a, const Grid<Vec3>& b, const Mask& mask);

struct MetricsReport {
  std::optional<AlbedoError> albedo;
  std::optional<NormalError> normals;
  std::optional<double> reconstruction;
  std::optional<double> lighting_global;
  std::optional<double> lighting_per_colour;

  nlohmann::json to_json() const;
};

}  // namespace invrender
