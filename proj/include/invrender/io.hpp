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

#pragma once

#include "invrender/core.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace invrender {

class PriorModel;

/// Raw PFM contents, rows top to bottom, channels interleaved.
struct PfmData {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;
};

PfmData read_pfm(const std::string& path);
/// Little-endian, negative scale.
void write_pfm(const std::string& path, const PfmData& pfm);

Grid<Vec3> read_pfm_rgb(const std::string& path);
Grid<double> read_pfm_gray(const std::string& path);
void write_pfm(const std::string& path, const Grid<Vec3>& img);
void write_pfm(const std::string& path, const Grid<double>& img);

/// Invalid normals are written as zero vectors.
void write_normals_pfm(const std::string& path, const NormalMap& normals);
NormalMap read_normals_pfm(const std::string& path);

/// 8-bit RGB PNG; the result is gamma encoded.
ImageRGB read_png(const std::string& path);
/// Quantizes to 8 bits. Linear images are gamma encoded first.
void write_png(const std::string& path, const ImageRGB& img);
Mask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const Mask& mask);
/// Quantization used by write_png: round(255 * clamp(v, 0, 1)).
std::uint8_t quantize8(double v);

nlohmann::json to_json(const Camera& cam);
Camera camera_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SHLighting& l);
SHLighting lighting_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PriorModel& prior);
PriorModel prior_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

/// Writes to a temporary sibling and renames over the destination.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace invrender
