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

// Feature spaces for the perceptual image distance. Every transform maps a
// linear RGB image plus a pixel mask to a flat feature vector with a
// per-element validity flag, and can push feature gradients back to pixels.

#pragma once

#include "invrender/core.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace invrender {

struct FeatureStack {
  std::vector<double> values;
  std::vector<std::uint8_t> valid;
};

class FeatureTransform {
 public:
  explicit FeatureTransform(double weight) : weight_(weight) {}
  virtual ~FeatureTransform() = default;

  virtual std::string name() const = 0;
  double weight() const { return weight_; }

  /// Validity depends only on the mask and the image size.
  virtual FeatureStack forward(const Grid<Vec3>& img, const Mask& mask) const = 0;
  /// grad_img += J(img)^T grad_features.
  virtual void backward(const Grid<Vec3>& img, const Mask& mask,
                        std::span<const double> grad_features,
                        Grid<Vec3>& grad_img) const = 0;

 private:
  double weight_;
};

using TransformSet = std::vector<std::shared_ptr<const FeatureTransform>>;

/// Scaled CIE LAB per pixel; valid where the mask is set.
class LabTransform final : public FeatureTransform {
 public:
  using FeatureTransform::FeatureTransform;
  std::string name() const override { return "lab"; }
  FeatureStack forward(const Grid<Vec3>& img, const Mask& mask) const override;
  void backward(const Grid<Vec3>& img, const Mask& mask,
                std::span<const double> grad_features,
                Grid<Vec3>& grad_img) const override;
};

/// Per-channel forward differences on a binomial Gaussian pyramid.
/// A pyramid pixel is valid only if its whole 5x5 support is valid; a
/// difference is valid if both of its pixels are.
class PyramidGradTransform final : public FeatureTransform {
 public:
  explicit PyramidGradTransform(double weight, int levels = 3)
      : FeatureTransform(weight), levels_(levels) {}
  std::string name() const override { return "pyramid-grad"; }
  int levels() const { return levels_; }
  FeatureStack forward(const Grid<Vec3>& img, const Mask& mask) const override;
  void backward(const Grid<Vec3>& img, const Mask& mask,
                std::span<const double> grad_features,
                Grid<Vec3>& grad_img) const override;

 private:
  int levels_;
};

/// Convolutional filter bank followed by a ReLU. Filters are read from a
/// 3-channel PFM of size (k * N) x k holding N k x k RGB filters side by
/// side. Outputs are valid where the whole k x k window is.
class FilterBankTransform final : public FeatureTransform {
 public:
  FilterBankTransform(double weight, int kernel, std::vector<Grid<Vec3>> filters);
  static std::shared_ptr<FilterBankTransform> load(const std::string& path,
                                                   double weight);
  std::string name() const override { return "file"; }
  FeatureStack forward(const Grid<Vec3>& img, const Mask& mask) const override;
  void backward(const Grid<Vec3>& img, const Mask& mask,
                std::span<const double> grad_features,
                Grid<Vec3>& grad_img) const override;

 private:
  int kernel_;
  std::vector<Grid<Vec3>> filters_;
};

/// lab (weight w_lab) and pyramid-grad (weight w_vgg).
TransformSet default_transforms(const LossWeights& weights);
/// Builds a set from names: "lab", "pyramid-grad", "file:<path>".
TransformSet make_transforms(const std::vector<std::string>& names,
                             const LossWeights& weights);

/// sum_t w_t * sqrt(mean over valid elements of (t(x) - t(y))^2).
/// If gx / gy are given, scale * d/dx and scale * d/dy are added to them.
/// Throws on an empty mask.
double perceptual_error(const Grid<Vec3>& x, const Grid<Vec3>& y, const Mask& mask,
                        const TransformSet& transforms, Grid<Vec3>* gx = nullptr,
                        Grid<Vec3>* gy = nullptr, double scale = 1.0);

}  // namespace invrender
