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

#include "invrender/pipeline.hpp"

#include "invrender/io.hpp"
#include "invrender/shlight.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <numeric>

namespace invrender {

namespace {

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).string();
}

}  // namespace

ViewRecord ViewRecord::from_json(const nlohmann::json& j, const std::string& base_dir) {
  ViewRecord r;
  r.image = resolve(j.at("image").get<std::string>(), base_dir);
  r.camera = camera_from_json(j.at("camera"));
  r.depth = resolve(j.at("depth").get<std::string>(), base_dir);
  r.sky_mask = resolve(j.value("sky_mask", std::string()), base_dir);
  if (j.contains("ground_mask") && !j["ground_mask"].is_null()) {
    r.ground_mask = resolve(j["ground_mask"].get<std::string>(), base_dir);
  }
  if (j.contains("guide_normals") && !j["guide_normals"].is_null()) {
    r.guide_normals = resolve(j["guide_normals"].get<std::string>(), base_dir);
  }
  return r;
}

nlohmann::json ViewRecord::to_json() const {
  nlohmann::json j{{"image", image}, {"camera", invrender::to_json(camera)},
                   {"depth", depth}, {"sky_mask", sky_mask}};
  if (ground_mask) j["ground_mask"] = *ground_mask;
  if (guide_normals) j["guide_normals"] = *guide_normals;
  return j;
}

std::vector<ViewRecord> load_records(const std::string& path) {
  const nlohmann::json j = read_json(path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  const nlohmann::json& arr = j.is_object() ? j.at("views") : j;
  if (!arr.is_array()) throw Error("records: expected an array of views");
  std::vector<ViewRecord> out;
  for (const auto& e : arr) out.push_back(ViewRecord::from_json(e, base));
  return out;
}

LoadedView load_view(const ViewRecord& r) {
  LoadedView v;
  v.image = read_png(r.image);
  v.camera = r.camera;
  v.depth = read_pfm_gray(r.depth);
  require_same_shape(v.image.pixels, v.depth, r.depth.c_str());
  v.foreground = Mask(v.depth.width(), v.depth.height(), 1);
  if (!r.sky_mask.empty()) {
    const Mask sky = read_mask_png(r.sky_mask);
    require_same_shape(v.image.pixels, sky, r.sky_mask.c_str());
    for (std::size_t i = 0; i < sky.size(); ++i) v.foreground[i] = !sky[i];
  }
  if (r.ground_mask) {
    v.ground = read_mask_png(*r.ground_mask);
    require_same_shape(v.image.pixels, *v.ground, r.ground_mask->c_str());
  }
  if (r.guide_normals) {
    v.guide = read_normals_pfm(*r.guide_normals);
    require_same_shape(v.image.pixels, v.guide->normals, r.guide_normals->c_str());
  }
  return v;
}

// -----------------------------------------------------------------------------

Camera scale_camera(const Camera& cam, double s) {
  Camera c = cam;
  c.f *= s;
  c.cx *= s;
  c.cy *= s;
  return c;
}

Camera crop_camera(const Camera& cam, int offset_x, int offset_y) {
  Camera c = cam;
  c.cx -= offset_x;
  c.cy -= offset_y;
  return c;
}

namespace {

// Separable tent filter of half-width max(1, 1/s) around x' / s.
struct Taps {
  std::vector<int> begin;
  std::vector<std::vector<double>> weights;
};

Taps make_taps(int out_n, int in_n, double s) {
  Taps t;
  const double radius = std::max(1.0, 1.0 / s);
  for (int o = 0; o < out_n; ++o) {
    const double centre = o / s;
    const int lo = std::max(0, static_cast<int>(std::ceil(centre - radius)));
    const int hi = std::min(in_n - 1, static_cast<int>(std::floor(centre + radius)));
    std::vector<double> w;
    double sum = 0;
    for (int k = lo; k <= hi; ++k) {
      const double v = std::max(0.0, 1.0 - std::abs(k - centre) / radius);
      w.push_back(v);
      sum += v;
    }
    for (auto& v : w) v /= sum;
    t.begin.push_back(lo);
    t.weights.push_back(std::move(w));
  }
  return t;
}

Grid<Vec3> resize(const Grid<Vec3>& src, int W, int H, double s) {
  const Taps tx = make_taps(W, src.width(), s);
  const Taps ty = make_taps(H, src.height(), s);
  Grid<Vec3> rows(W, src.height(), Vec3::Zero());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < W; ++x) {
      Vec3 acc = Vec3::Zero();
      for (std::size_t k = 0; k < tx.weights[x].size(); ++k) {
        acc += tx.weights[x][k] * src(tx.begin[x] + static_cast<int>(k), y);
      }
      rows(x, y) = acc;
    }
  }
  Grid<Vec3> out(W, H, Vec3::Zero());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      Vec3 acc = Vec3::Zero();
      for (std::size_t k = 0; k < ty.weights[y].size(); ++k) {
        acc += ty.weights[y][k] * rows(x, ty.begin[y] + static_cast<int>(k));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

DepthMap resize_nearest(const DepthMap& src, int W, int H, double s) {
  DepthMap out(W, H);
  for (int y = 0; y < H; ++y) {
    const int sy = std::clamp(static_cast<int>(std::lround(y / s)), 0, src.height() - 1);
    for (int x = 0; x < W; ++x) {
      const int sx = std::clamp(static_cast<int>(std::lround(x / s)), 0, src.width() - 1);
      out(x, y) = src(sx, sy);
    }
  }
  return out;
}

bool valid_depth(double d) { return std::isfinite(d) && d > 0; }

}  // namespace

std::vector<Crop> preprocess(const ImageRGB& image, const DepthMap& depth,
                             const Camera& camera, const PreprocessOptions& opt) {
  require_same_shape(image.pixels, depth, "preprocess");
  const int n = opt.size;
  if (n < 1) throw Error("preprocess: crop size must be positive");
  if (std::min(image.width(), image.height()) < n) {
    throw Error("preprocess: image smaller than the crop size");
  }
  const double s = static_cast<double>(n) / std::min(image.width(), image.height());
  const int W = std::max(n, static_cast<int>(std::lround(image.width() * s)));
  const int H = std::max(n, static_cast<int>(std::lround(image.height() * s)));
  const ImageRGB scaled(resize(image.pixels, W, H, s), image.encoding);
  const DepthMap scaled_depth = resize_nearest(depth, W, H, s);
  const Camera scaled_cam = scale_camera(camera, s);

  // Summed-area table of valid depth.
  Grid<long> sat(W + 1, H + 1, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      sat(x + 1, y + 1) = sat(x, y + 1) + sat(x + 1, y) - sat(x, y) +
                          (valid_depth(scaled_depth(x, y)) ? 1 : 0);
    }
  }
  auto window = [&](int x, int y) {
    return sat(x + n, y + n) - sat(x, y + n) - sat(x + n, y) + sat(x, y);
  };

  std::vector<std::pair<int, int>> chosen;
  auto overlaps = [&](int x, int y) {
    for (const auto& [cx, cy] : chosen) {
      if (std::abs(cx - x) < n && std::abs(cy - y) < n) return true;
    }
    return false;
  };
  const long min_count =
      std::max<long>(1, static_cast<long>(std::ceil(opt.min_valid_fraction * n * n)));
  std::vector<Crop> crops;
  while (true) {
    long best = -1;
    int bx = 0, by = 0;
    for (int y = 0; y + n <= H; ++y) {
      for (int x = 0; x + n <= W; ++x) {
        if (overlaps(x, y)) continue;
        const long c = window(x, y);
        if (c > best) {
          best = c;
          bx = x;
          by = y;
        }
      }
    }
    if (best < min_count) break;
    chosen.emplace_back(bx, by);
    Crop crop;
    Grid<Vec3> px(n, n);
    DepthMap d(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        px(x, y) = scaled.pixels(bx + x, by + y);
        d(x, y) = scaled_depth(bx + x, by + y);
      }
    }
    crop.image = ImageRGB(std::move(px), image.encoding);
    crop.depth = std::move(d);
    crop.camera = crop_camera(scaled_cam, bx, by);
    crop.scale = s;
    crop.offset_x = bx;
    crop.offset_y = by;
    crops.push_back(std::move(crop));
  }
  return crops;
}

// -----------------------------------------------------------------------------

double histogram_correlation(const PairView& a, const PairView& b, int bins) {
  if (bins < 2) throw Error("histogram_correlation: need at least two bins");
  Mask b_valid = b.foreground;
  for (std::size_t k = 0; k < b_valid.size(); ++k) b_valid[k] = b_valid[k] && valid_depth(b.depth[k]);
  const auto [proj, proj_valid] =
      cross_project(b.linear_image, b_valid, a.depth, b.camera, a.camera);
  std::vector<double> ha(bins, 0.0), hb(bins, 0.0);
  auto bin = [&](const Vec3& v) {
    const double g = std::clamp(v.mean(), 0.0, 1.0);
    return std::min(bins - 1, static_cast<int>(g * bins));
  };
  std::size_t n = 0;
  for (std::size_t k = 0; k < proj.size(); ++k) {
    if (!a.foreground[k] || !proj_valid[k] || !valid_depth(a.depth[k])) continue;
    ha[bin(a.linear_image[k])] += 1;
    hb[bin(proj[k])] += 1;
    ++n;
  }
  if (n == 0) return 0.0;
  const double ma = std::accumulate(ha.begin(), ha.end(), 0.0) / bins;
  const double mb = std::accumulate(hb.begin(), hb.end(), 0.0) / bins;
  double sab = 0, saa = 0, sbb = 0;
  for (int k = 0; k < bins; ++k) {
    sab += (ha[k] - ma) * (hb[k] - mb);
    saa += (ha[k] - ma) * (ha[k] - ma);
    sbb += (hb[k] - mb) * (hb[k] - mb);
  }
  if (saa == 0 || sbb == 0) return saa == sbb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {

std::optional<Vec3> depth_centroid(const PairView& v) {
  Vec3 acc = Vec3::Zero();
  std::size_t n = 0;
  for (int y = 0; y < v.depth.height(); ++y) {
    for (int x = 0; x < v.depth.width(); ++x) {
      const double d = v.depth(x, y);
      if (!v.foreground(x, y) || !valid_depth(d)) continue;
      acc += backproject(v.camera, x, y, d);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

double scene_diameter(const std::vector<PairView>& views) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : views) {
    for (int y = 0; y < v.depth.height(); ++y) {
      for (int x = 0; x < v.depth.width(); ++x) {
        const double d = v.depth(x, y);
        if (!v.foreground(x, y) || !valid_depth(d)) continue;
        const Vec3 p = backproject(v.camera, x, y, d);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  }
  return (hi.array() >= lo.array()).all() ? (hi - lo).norm() : 0.0;
}

}  // namespace

std::vector<std::pair<int, int>> select_pairs(const std::vector<PairView>& views,
                                              const PairThresholds& th) {
  const int N = static_cast<int>(views.size());
  if (N < 2) throw Error("select_pairs: need at least two views");
  std::vector<double> dists;
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      dists.push_back((views[i].camera.center() - views[j].camera.center()).norm());
    }
  }
  std::vector<double> sorted = dists;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median =
      m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  const double quarter_diameter = scene_diameter(views) / 4.0;

  std::vector<std::optional<Vec3>> centroids;
  for (const auto& v : views) centroids.push_back(depth_centroid(v));

  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double dc = (views[i].camera.center() - views[j].camera.center()).norm();
      if (dc > th.camera_factor * median) continue;
      if (th.max_camera_distance && dc > *th.max_camera_distance) continue;
      if (!centroids[i] || !centroids[j]) continue;
      if ((*centroids[i] - *centroids[j]).norm() > th.centroid_factor * quarter_diameter) {
        continue;
      }
      const double r = std::max(histogram_correlation(views[i], views[j], th.bins),
                                histogram_correlation(views[j], views[i], th.bins));
      if (r > th.r_max) continue;
      out.emplace_back(i, j);
      out.emplace_back(j, i);
    }
  }
  return out;
}

// -----------------------------------------------------------------------------

NormalMap guide_normals(const DepthMap& depth, const Camera& camera,
                        const std::optional<Mask>& ground,
                        const std::optional<GroundPlane>& plane) {
  NormalMap n = normals_from_depth(depth, camera);
  if (ground && plane) return inpaint_ground_normals(n, *ground, *plane, camera);
  if (ground && !plane) throw Error("guide_normals: ground mask without a ground plane");
  return n;
}

// -----------------------------------------------------------------------------

namespace {

// Per-channel optimal scale then mean squared error over the listed pixels.
double scaled_mse(const AlbedoMap& pred, const AlbedoMap& ref,
                  const std::vector<std::size_t>& idx) {
  Vec3 pp = Vec3::Zero(), pr = Vec3::Zero();
  for (auto i : idx) {
    pp += pred[i].cwiseProduct(pred[i]);
    pr += pred[i].cwiseProduct(ref[i]);
  }
  Vec3 k;
  for (int c = 0; c < 3; ++c) k[c] = pp[c] > 0 ? pr[c] / pp[c] : 0.0;
  double sum = 0;
  for (auto i : idx) sum += (k.cwiseProduct(pred[i]) - ref[i]).squaredNorm();
  return sum / (3.0 * static_cast<double>(idx.size()));
}

}  // namespace

AlbedoError albedo_error(const AlbedoMap& pred, const AlbedoMap& ref, const Mask& mask) {
  require_same_shape(pred, ref, "albedo_error");
  require_same_shape(pred, mask, "albedo_error");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(i);
  }
  if (idx.empty()) throw Error("albedo_error: empty mask");
  AlbedoError e;
  e.mse = scaled_mse(pred, ref, idx);

  const int W = mask.width(), H = mask.height();
  const int side = static_cast<int>(std::ceil(0.1 * std::max(W, H)));
  const int stride = std::max(1, side / 2);
  double acc = 0;
  for (int y0 = 0; y0 + side <= H; y0 += stride) {
    for (int x0 = 0; x0 + side <= W; x0 += stride) {
      std::vector<std::size_t> win;
      for (int y = y0; y < y0 + side; ++y) {
        for (int x = x0; x < x0 + side; ++x) {
          if (mask(x, y)) win.push_back(mask.index(x, y));
        }
      }
      if (4 * win.size() < static_cast<std::size_t>(side) * side) continue;
      acc += scaled_mse(pred, ref, win);
      ++e.lmse_windows;
    }
  }
  e.lmse = e.lmse_windows > 0 ? acc / e.lmse_windows : e.mse;
  return e;
}

NormalError normal_error(const NormalMap& pred, const NormalMap& ref) {
  require_same_shape(pred.normals, ref.normals, "normal_error");
  std::vector<double> ang;
  for (std::size_t i = 0; i < pred.normals.size(); ++i) {
    if (!pred.valid[i] || !ref.valid[i]) continue;
    const double c = std::clamp(pred.normals[i].dot(ref.normals[i]), -1.0, 1.0);
    ang.push_back(std::acos(c) * 180.0 / std::numbers::pi);
  }
  if (ang.empty()) throw Error("normal_error: empty joint mask");
  NormalError e;
  for (double a : ang) e.mean_deg += a;
  e.mean_deg /= static_cast<double>(ang.size());
  std::sort(ang.begin(), ang.end());
  const std::size_t n = ang.size();
  e.median_deg = n % 2 ? ang[n / 2] : 0.5 * (ang[n / 2 - 1] + ang[n / 2]);
  return e;
}

double lighting_error(const SHLighting& pred, const SHLighting& ref, LightingScale mode) {
  const int R = kHemisphereResolution;
  const ImageRGB p = render_hemisphere(pred, R);
  const ImageRGB r = render_hemisphere(ref, R);
  const Mask disc = hemisphere_mask(R);
  Vec3 pp = Vec3::Zero(), pr = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < disc.size(); ++i) {
    if (!disc[i]) continue;
    pp += p.pixels[i].cwiseProduct(p.pixels[i]);
    pr += p.pixels[i].cwiseProduct(r.pixels[i]);
    ++n;
  }
  Vec3 k;
  if (mode == LightingScale::global) {
    if (!(pp.sum() > 0)) throw Error("lighting_error: prediction has zero energy");
    k.setConstant(pr.sum() / pp.sum());
  } else {
    for (int c = 0; c < 3; ++c) {
      if (!(pp[c] > 0)) throw Error("lighting_error: prediction channel has zero energy");
      k[c] = pr[c] / pp[c];
    }
  }
  double sum = 0;
  for (std::size_t i = 0; i < disc.size(); ++i) {
    if (disc[i]) sum += (k.cwiseProduct(p.pixels[i]) - r.pixels[i]).squaredNorm();
  }
  return sum / (3.0 * static_cast<double>(n));
}

double reconstruction_error(const Grid<Vec3>& a, const Grid<Vec3>& b, const Mask& mask) {
  require_same_shape(a, b, "reconstruction_error");
  require_same_shape(a, mask, "reconstruction_error");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    sum += (a[i] - b[i]).squaredNorm();
    ++n;
  }
  if (n == 0) throw Error("reconstruction_error: empty mask");
  return sum / (3.0 * static_cast<double>(n));
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (albedo) j["albedo"] = {{"mse", albedo->mse}, {"lmse", albedo->lmse},
                             {"lmse_windows", albedo->lmse_windows}};
  if (normals) j["normals"] = {{"mean_deg", normals->mean_deg},
                               {"median_deg", normals->median_deg}};
  if (reconstruction) j["reconstruction_mse"] = *reconstruction;
  if (lighting_global || lighting_per_colour) {
    j["lighting"] = nlohmann::json::object();
    if (lighting_global) j["lighting"]["global"] = *lighting_global;
    if (lighting_per_colour) j["lighting"]["per_colour"] = *lighting_per_colour;
  }
  return j;
}

}  // namespace invrender
