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

#include <algorithm>
#include <array>
#include <cmath>

namespace invrender {

FeatureStack LabTransform::forward(const Grid<Vec3>& img, const Mask& mask) const {
  require_same_shape(img, mask, "lab transform");
  FeatureStack out;
  out.values.assign(3 * img.size(), 0.0);
  out.valid.assign(3 * img.size(), 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!mask[i]) continue;
    const Vec3 lab = rgb_to_lab(img[i]);
    for (int c = 0; c < 3; ++c) {
      out.values[3 * i + c] = lab[c];
      out.valid[3 * i + c] = 1;
    }
  }
  return out;
}

void LabTransform::backward(const Grid<Vec3>& img, const Mask& mask,
                            std::span<const double> grad_features,
                            Grid<Vec3>& grad_img) const {
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!mask[i]) continue;
    const Vec3 g(grad_features[3 * i], grad_features[3 * i + 1],
                 grad_features[3 * i + 2]);
    grad_img[i] += rgb_to_lab_jacobian(img[i]).transpose() * g;
  }
}

// -----------------------------------------------------------------------------

namespace {

constexpr std::array<double, 5> kBinomial{1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0,
                                          1 / 16.0};

struct Level {
  Grid<Vec3> img;
  Mask mask;
};

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

Level downsample(const Level& in) {
  const int W = in.img.width();
  const int H = in.img.height();
  const int w = (W + 1) / 2;
  const int h = (H + 1) / 2;
  Level out{Grid<Vec3>(w, h, Vec3::Zero()), Mask(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Vec3 acc = Vec3::Zero();
      bool ok = true;
      for (int b = 0; b < 5; ++b) {
        const int sy = clampi(2 * y + b - 2, 0, H - 1);
        for (int a = 0; a < 5; ++a) {
          const int sx = clampi(2 * x + a - 2, 0, W - 1);
          acc += kBinomial[a] * kBinomial[b] * in.img(sx, sy);
          ok = ok && in.mask(sx, sy);
        }
      }
      out.img(x, y) = acc;
      out.mask(x, y) = ok;
    }
  }
  return out;
}

void downsample_adjoint(const Grid<Vec3>& grad_out, Grid<Vec3>& grad_in) {
  const int W = grad_in.width();
  const int H = grad_in.height();
  for (int y = 0; y < grad_out.height(); ++y) {
    for (int x = 0; x < grad_out.width(); ++x) {
      const Vec3& g = grad_out(x, y);
      for (int b = 0; b < 5; ++b) {
        const int sy = clampi(2 * y + b - 2, 0, H - 1);
        for (int a = 0; a < 5; ++a) {
          const int sx = clampi(2 * x + a - 2, 0, W - 1);
          grad_in(sx, sy) += kBinomial[a] * kBinomial[b] * g;
        }
      }
    }
  }
}

std::vector<Level> build_pyramid(const Grid<Vec3>& img, const Mask& mask, int levels) {
  std::vector<Level> pyr;
  pyr.push_back(Level{img, mask});
  for (int k = 1; k < levels; ++k) {
    if (pyr.back().img.width() < 2 || pyr.back().img.height() < 2) break;
    pyr.push_back(downsample(pyr.back()));
  }
  return pyr;
}

// Per level: dx then dy, each W*H*3 entries.
std::size_t level_features(const Level& lv) { return 6 * lv.img.size(); }

}  // namespace

FeatureStack PyramidGradTransform::forward(const Grid<Vec3>& img,
                                           const Mask& mask) const {
  require_same_shape(img, mask, "pyramid-grad transform");
  const auto pyr = build_pyramid(img, mask, levels_);
  FeatureStack out;
  std::size_t total = 0;
  for (const auto& lv : pyr) total += level_features(lv);
  out.values.assign(total, 0.0);
  out.valid.assign(total, 0);
  std::size_t off = 0;
  for (const auto& lv : pyr) {
    const int W = lv.img.width();
    const int H = lv.img.height();
    const std::size_t n = lv.img.size();
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t i = lv.img.index(x, y);
        if (x + 1 < W && lv.mask(x, y) && lv.mask(x + 1, y)) {
          const Vec3 d = lv.img(x + 1, y) - lv.img(x, y);
          for (int c = 0; c < 3; ++c) {
            out.values[off + 3 * i + c] = d[c];
            out.valid[off + 3 * i + c] = 1;
          }
        }
        if (y + 1 < H && lv.mask(x, y) && lv.mask(x, y + 1)) {
          const Vec3 d = lv.img(x, y + 1) - lv.img(x, y);
          for (int c = 0; c < 3; ++c) {
            out.values[off + 3 * (n + i) + c] = d[c];
            out.valid[off + 3 * (n + i) + c] = 1;
          }
        }
      }
    }
    off += level_features(lv);
  }
  return out;
}

void PyramidGradTransform::backward(const Grid<Vec3>& img, const Mask& mask,
                                    std::span<const double> grad_features,
                                    Grid<Vec3>& grad_img) const {
  // Shapes and masks only; the transform is linear in the image.
  const auto pyr = build_pyramid(img, mask, levels_);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& lv : pyr) {
    offsets.push_back(off);
    off += level_features(lv);
  }
  Grid<Vec3> carry;
  for (int k = static_cast<int>(pyr.size()) - 1; k >= 0; --k) {
    const Level& lv = pyr[k];
    const int W = lv.img.width();
    const int H = lv.img.height();
    const std::size_t n = lv.img.size();
    Grid<Vec3> g(W, H, Vec3::Zero());
    if (!carry.empty()) downsample_adjoint(carry, g);
    const std::size_t base = offsets[k];
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t i = lv.img.index(x, y);
        if (x + 1 < W) {
          const Vec3 gd(grad_features[base + 3 * i], grad_features[base + 3 * i + 1],
                        grad_features[base + 3 * i + 2]);
          g(x + 1, y) += gd;
          g(x, y) -= gd;
        }
        if (y + 1 < H) {
          const std::size_t j = base + 3 * (n + i);
          const Vec3 gd(grad_features[j], grad_features[j + 1], grad_features[j + 2]);
          g(x, y + 1) += gd;
          g(x, y) -= gd;
        }
      }
    }
    carry = std::move(g);
  }
  for (std::size_t i = 0; i < grad_img.size(); ++i) grad_img[i] += carry[i];
}

// -----------------------------------------------------------------------------

FilterBankTransform::FilterBankTransform(double weight, int kernel,
                                         std::vector<Grid<Vec3>> filters)
    : FeatureTransform(weight), kernel_(kernel), filters_(std::move(filters)) {
  if (kernel_ < 1 || kernel_ % 2 == 0) throw Error("filter bank: kernel must be odd");
  if (filters_.empty()) throw Error("filter bank: no filters");
  for (const auto& f : filters_) {
    if (f.width() != kernel_ || f.height() != kernel_) {
      throw Error("filter bank: filter size mismatch");
    }
  }
}

std::shared_ptr<FilterBankTransform> FilterBankTransform::load(const std::string& path,
                                                               double weight) {
  const Grid<Vec3> sheet = read_pfm_rgb(path);
  const int k = sheet.height();
  if (k < 1 || sheet.width() % k != 0) {
    throw Error("filter bank: sheet width must be a multiple of its height");
  }
  std::vector<Grid<Vec3>> filters;
  for (int n = 0; n < sheet.width() / k; ++n) {
    Grid<Vec3> f(k, k);
    for (int y = 0; y < k; ++y) {
      for (int x = 0; x < k; ++x) f(x, y) = sheet(n * k + x, y);
    }
    filters.push_back(std::move(f));
  }
  return std::make_shared<FilterBankTransform>(weight, k, std::move(filters));
}

FeatureStack FilterBankTransform::forward(const Grid<Vec3>& img, const Mask& mask) const {
  require_same_shape(img, mask, "filter bank transform");
  const int W = img.width();
  const int H = img.height();
  const int r = kernel_ / 2;
  const std::size_t N = filters_.size();
  FeatureStack out;
  out.values.assign(N * img.size(), 0.0);
  out.valid.assign(N * img.size(), 0);
  for (int y = r; y < H - r; ++y) {
    for (int x = r; x < W - r; ++x) {
      bool ok = true;
      for (int b = -r; b <= r && ok; ++b) {
        for (int a = -r; a <= r && ok; ++a) ok = mask(x + a, y + b) != 0;
      }
      if (!ok) continue;
      const std::size_t i = img.index(x, y);
      for (std::size_t n = 0; n < N; ++n) {
        double acc = 0;
        for (int b = -r; b <= r; ++b) {
          for (int a = -r; a <= r; ++a) {
            acc += filters_[n](a + r, b + r).dot(img(x + a, y + b));
          }
        }
        out.values[N * i + n] = std::max(acc, 0.0);
        out.valid[N * i + n] = 1;
      }
    }
  }
  return out;
}

void FilterBankTransform::backward(const Grid<Vec3>& img, const Mask& mask,
                                   std::span<const double> grad_features,
                                   Grid<Vec3>& grad_img) const {
  const FeatureStack fwd = forward(img, mask);
  const int W = img.width();
  const int H = img.height();
  const int r = kernel_ / 2;
  const std::size_t N = filters_.size();
  for (int y = r; y < H - r; ++y) {
    for (int x = r; x < W - r; ++x) {
      const std::size_t i = img.index(x, y);
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t e = N * i + n;
        if (!fwd.valid[e] || fwd.values[e] <= 0) continue;
        const double g = grad_features[e];
        for (int b = -r; b <= r; ++b) {
          for (int a = -r; a <= r; ++a) grad_img(x + a, y + b) += g * filters_[n](a + r, b + r);
        }
      }
    }
  }
}

// -----------------------------------------------------------------------------

TransformSet default_transforms(const LossWeights& weights) {
  return {std::make_shared<LabTransform>(weights.lab),
          std::make_shared<PyramidGradTransform>(weights.vgg)};
}

TransformSet make_transforms(const std::vector<std::string>& names,
                             const LossWeights& weights) {
  TransformSet out;
  for (const auto& n : names) {
    if (n == "lab") {
      out.push_back(std::make_shared<LabTransform>(weights.lab));
    } else if (n == "pyramid-grad") {
      out.push_back(std::make_shared<PyramidGradTransform>(weights.vgg));
    } else if (n.rfind("file:", 0) == 0) {
      out.push_back(FilterBankTransform::load(n.substr(5), weights.vgg));
    } else {
      throw Error("unknown feature transform '" + n + "'");
    }
  }
  return out;
}

double perceptual_error(const Grid<Vec3>& x, const Grid<Vec3>& y, const Mask& mask,
                        const TransformSet& transforms, Grid<Vec3>* gx,
                        Grid<Vec3>* gy, double scale) {
  require_same_shape(x, y, "perceptual_error");
  require_same_shape(x, mask, "perceptual_error");
  if (count(mask) == 0) throw Error("perceptual_error: empty mask");
  double total = 0;
  for (const auto& t : transforms) {
    if (t->weight() == 0) continue;
    const FeatureStack fx = t->forward(x, mask);
    const FeatureStack fy = t->forward(y, mask);
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t e = 0; e < fx.values.size(); ++e) {
      if (!fx.valid[e]) continue;
      const double d = fx.values[e] - fy.values[e];
      sum += d * d;
      ++n;
    }
    if (n == 0) continue;
    const double rms = std::sqrt(sum / static_cast<double>(n));
    total += t->weight() * rms;
    if ((!gx && !gy) || rms == 0) continue;
    const double k = scale * t->weight() / (static_cast<double>(n) * rms);
    std::vector<double> gf(fx.values.size(), 0.0);
    for (std::size_t e = 0; e < gf.size(); ++e) {
      if (fx.valid[e]) gf[e] = k * (fx.values[e] - fy.values[e]);
    }
    if (gx) t->backward(x, mask, gf, *gx);
    if (gy) {
      for (auto& v : gf) v = -v;
      t->backward(y, mask, gf, *gy);
    }
  }
  return total;
}

}  // namespace invrender
