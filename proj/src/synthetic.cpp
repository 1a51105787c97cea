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

#include "invrender/synthetic.hpp"

#include "invrender/io.hpp"
#include "invrender/kernels.hpp"
#include "invrender/shlight.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace invrender {

namespace {
constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
}  // namespace

EnvMap procedural_sky(std::uint64_t seed, int height) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 17);
  const double sun_theta = uniform(rng, 0.1, 1.35);
  const double sun_phi = uniform(rng, 0.0, 2 * kPi);
  const double sun_power = uniform(rng, 4.0, 40.0);
  const double sun_width = uniform(rng, 0.06, 0.25);
  const double overcast = uniform(rng, 0.0, 1.0);
  const Vec3 zenith(uniform(rng, 0.15, 0.35), uniform(rng, 0.3, 0.5), uniform(rng, 0.6, 1.0));
  const Vec3 horizon(uniform(rng, 0.6, 0.9), uniform(rng, 0.65, 0.9), uniform(rng, 0.7, 1.0));
  const Vec3 sun_colour(1.0, uniform(rng, 0.8, 0.95), uniform(rng, 0.6, 0.85));
  const Vec3 ground(uniform(rng, 0.1, 0.3), uniform(rng, 0.1, 0.25), uniform(rng, 0.05, 0.2));
  const Vec3 sun_dir = env_direction(sun_theta, sun_phi);

  Grid<Vec3> rad(2 * height, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < 2 * height; ++x) {
      const Vec3 d = env_texel_direction(x, y, height);
      Vec3 v;
      if (d.y() > 0) {
        const double h = std::pow(1.0 - d.y(), 3.0);
        v = zenith + (horizon - zenith) * h;
        const double cosang = std::clamp(d.dot(sun_dir), -1.0, 1.0);
        const double ang = std::acos(cosang);
        const double lobe = std::exp(-0.5 * (ang / sun_width) * (ang / sun_width));
        v += (1.0 - overcast) * sun_power * lobe * sun_colour;
        v = v * (0.4 + 0.6 * overcast) + overcast * Vec3::Constant(0.5);
      } else {
        v = ground * (1.0 + 0.5 * (1.0 - overcast));
      }
      rad(x, y) = v;
    }
  }
  return EnvMap(std::move(rad));
}

std::vector<EnvMap> default_env_maps(int count) {
  std::vector<EnvMap> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(procedural_sky(static_cast<std::uint64_t>(i)));
  return out;
}

std::vector<SHLighting> augmented_samples(const std::vector<EnvMap>& envs) {
  std::vector<SHLighting> samples;
  samples.reserve(envs.size() * kAugmentationsPerEnv);
  for (const auto& env : envs) {
    const auto aug = augment_rotations(sh_project_envmap(env));
    samples.insert(samples.end(), aug.begin(), aug.end());
  }
  return samples;
}

const PriorModel& default_prior() {
  static const PriorModel prior = build_prior(augmented_samples(default_env_maps()));
  return prior;
}

double vmf_kappa(double sigma_degrees) {
  const double s = sigma_degrees * kPi / 180.0;
  return 1.0 / (s * s);
}

Vec3 sample_vmf(const Vec3& mean, double kappa, std::mt19937_64& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  const double w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
  const double phi = uniform(rng, 0.0, 2 * kPi);
  Vec3 a = std::abs(mean.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = mean.cross(a).normalized();
  const Vec3 e2 = mean.cross(e1);
  const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
  return (w * mean + r * (std::cos(phi) * e1 + std::sin(phi) * e2)).normalized();
}

// -----------------------------------------------------------------------------

namespace {

// World frame shares the camera's y-down convention; the ground sits near y = 0.
struct Box {
  Vec3 lo, hi;
  Vec3 albedo;
};

struct World {
  double amplitude;
  std::vector<Box> boxes;
  std::vector<Vec3> palette;

  double terrain(double x, double z) const {
    return amplitude * std::sin(0.9 * x + 0.3) * std::cos(0.7 * z);
  }
  Vec3 terrain_normal(double x, double z) const {
    const double gx = amplitude * 0.9 * std::cos(0.9 * x + 0.3) * std::cos(0.7 * z);
    const double gz = -amplitude * 0.7 * std::sin(0.9 * x + 0.3) * std::sin(0.7 * z);
    return Vec3(gx, -1.0, gz).normalized();  // outward, pointing up
  }
  Vec3 ground_albedo(double x, double z) const {
    const auto cx = static_cast<long>(std::floor(x / 1.3));
    const auto cz = static_cast<long>(std::floor(z / 1.3));
    const auto h = static_cast<std::size_t>((cx * 73856093L) ^ (cz * 19349663L));
    return palette[h % palette.size()];
  }
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal;  // outward, world
  Vec3 albedo;
  bool ground = false;
};

std::optional<std::pair<double, Vec3>> hit_box(const Box& b, const Vec3& o, const Vec3& d) {
  double t0 = 0, t1 = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < b.lo[k] || o[k] > b.hi[k]) return std::nullopt;
      continue;
    }
    double ta = (b.lo[k] - o[k]) / d[k];
    double tb = (b.hi[k] - o[k]) / d[k];
    double s = -1;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1;
    }
    if (ta > t0) {
      t0 = ta;
      axis = k;
      sign = s;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || axis < 0 || t0 <= 1e-9) return std::nullopt;
  Vec3 n = Vec3::Zero();
  n[axis] = sign;
  return std::make_pair(t0, n);
}

std::optional<double> hit_terrain(const World& w, const Vec3& o, const Vec3& d, double tmax) {
  auto f = [&](double t) {
    const Vec3 p = o + t * d;
    return p.y() - w.terrain(p.x(), p.z());
  };
  constexpr double kStep = 0.02;
  double prev = f(0);
  if (prev >= 0) return std::nullopt;
  for (double t = kStep; t < tmax; t += kStep) {
    const double cur = f(t);
    if (cur >= 0) {
      double a = t - kStep, b = t;
      for (int i = 0; i < 60; ++i) {
        const double m = 0.5 * (a + b);
        (f(m) >= 0 ? b : a) = m;
      }
      return 0.5 * (a + b);
    }
    prev = cur;
  }
  return std::nullopt;
}

Hit trace(const World& w, const Vec3& o, const Vec3& d) {
  Hit h;
  for (const auto& b : w.boxes) {
    if (auto r = hit_box(b, o, d); r && r->first < h.t) {
      h.t = r->first;
      h.normal = r->second;
      h.albedo = b.albedo;
      h.ground = false;
    }
  }
  const double tmax = std::isfinite(h.t) ? h.t : 80.0;
  if (auto t = hit_terrain(w, o, d, tmax); t && *t < h.t) {
    const Vec3 p = o + *t * d;
    h.t = *t;
    h.normal = w.terrain_normal(p.x(), p.z());
    h.albedo = w.ground_albedo(p.x(), p.z());
    h.ground = true;
  }
  return h;
}

bool occluded(const World& w, const Vec3& p, const Vec3& to_sun) {
  for (const auto& b : w.boxes) {
    if (hit_box(b, p + 1e-6 * to_sun, to_sun)) return true;
  }
  return false;
}

World make_world(const SyntheticConfig& c, std::mt19937_64& rng) {
  World w;
  w.amplitude = c.terrain_amplitude;
  w.palette = {{0.55, 0.45, 0.35}, {0.35, 0.5, 0.25}, {0.7, 0.68, 0.6},
               {0.4, 0.35, 0.3},   {0.6, 0.3, 0.25},  {0.3, 0.4, 0.55}};
  const std::vector<Vec3> box_palette = {
      {0.8, 0.75, 0.65}, {0.65, 0.3, 0.25}, {0.45, 0.55, 0.7}, {0.85, 0.8, 0.5}};
  for (int k = 0; k < c.box_count; ++k) {
    const double x = uniform(rng, -2.0, 2.0);
    const double z = uniform(rng, 4.5, 8.0);
    const double sx = uniform(rng, 0.4, 0.9);
    const double sz = uniform(rng, 0.4, 0.9);
    const double h = uniform(rng, 0.6, 1.6);
    w.boxes.push_back({Vec3(x - sx, -h, z - sz), Vec3(x + sx, 0.5, z + sz),
                       box_palette[static_cast<std::size_t>(k) % box_palette.size()]});
  }
  return w;
}

Camera make_camera(int W, int H, double yaw, const Vec3& centre) {
  constexpr double kPitch = 0.5;  // looking down
  const Mat3 Rx = Eigen::AngleAxisd(kPitch, Vec3::UnitX()).toRotationMatrix();
  const Mat3 Ry = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
  Camera cam;
  cam.f = 1.0 * std::max(W, H);
  cam.cx = (W - 1) / 2.0;
  cam.cy = (H - 1) / 2.0;
  cam.R = Rx * Ry;  // world -> camera
  cam.t = -cam.R * centre;
  return cam;
}

// Lighting drawn from the prior, shrunk towards the mean until every
// channel's shading over `normals` is comfortably positive.
Eigen::VectorXd draw_lighting(const PriorModel& prior, const std::vector<Vec3>& normals,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd a(prior.dim());
  for (int k = 0; k < prior.dim(); ++k) a[k] = std::clamp(gauss(rng), -2.0, 2.0);
  for (int attempt = 0; attempt < 60; ++attempt) {
    const SHLighting l = prior.reconstruct(a);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& n : normals) {
      const Vec3 s = kernels::shade(n, l.l);
      lo = std::min(lo, s.minCoeff());
      hi = std::max(hi, s.maxCoeff());
    }
    if (hi > 0 && lo > 0.15 * hi) return a;
    a *= 0.85;
  }
  throw Error("make_synthetic: prior mean does not light the scene");
}

struct Geometry {
  Grid<Vec3> albedo;
  Grid<Vec3> normals;  // camera frame, inward
  DepthMap depth;
  Mask fg, ground;
  std::vector<Vec3> points;  // world, per pixel
};

Geometry cast(const World& w, const Camera& cam, int W, int H) {
  Geometry g{Grid<Vec3>(W, H, Vec3::Zero()), Grid<Vec3>(W, H, Vec3(0, 0, 1)),
             DepthMap(W, H, std::numeric_limits<double>::quiet_NaN()), Mask(W, H, 0),
             Mask(W, H, 0), std::vector<Vec3>(static_cast<std::size_t>(W) * H)};
  const Vec3 o = cam.center();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Vec3 dc((x - cam.cx) / cam.f, (y - cam.cy) / cam.f, 1.0);
      const Vec3 d = (cam.R.transpose() * dc).normalized();
      const Hit h = trace(w, o, d);
      if (!std::isfinite(h.t)) continue;
      const Vec3 p = o + h.t * d;
      Vec3 n = -(cam.R * h.normal);
      if (n.z() <= 1e-3) continue;
      g.fg(x, y) = 1;
      g.ground(x, y) = h.ground;
      g.albedo(x, y) = h.albedo;
      g.normals(x, y) = n.normalized();
      g.depth(x, y) = (cam.R * p + cam.t).z();
      g.points[g.fg.index(x, y)] = p;
    }
  }
  return g;
}

}  // namespace

SyntheticScene make_synthetic(const SyntheticConfig& c, const PriorModel& prior) {
  if (c.width < 8 || c.height < 8) throw Error("make_synthetic: image too small");
  if (c.views < 1 || c.views > 2) throw Error("make_synthetic: views must be 1 or 2");
  if (!(c.guide_noise_deg >= 0)) throw Error("make_synthetic: negative guide noise");
  std::mt19937_64 rng(c.seed);
  const World world = make_world(c, rng);
  const int W = c.width, H = c.height;

  std::vector<Camera> cams = {make_camera(W, H, 0.0, Vec3(0, -1.6, 0))};
  if (c.views == 2) cams.push_back(make_camera(W, H, -0.12, Vec3(0.6, -1.55, 0.2)));

  std::vector<Geometry> geos;
  for (const auto& cam : cams) geos.push_back(cast(world, cam, W, H));

  std::vector<Vec3> visible;
  for (const auto& g : geos) {
    for (std::size_t i = 0; i < g.fg.size(); ++i) {
      if (g.fg[i]) visible.push_back(g.normals[i]);
    }
  }
  if (visible.empty()) throw Error("make_synthetic: empty scene");

  SyntheticScene scene;
  scene.light_coeffs = draw_lighting(prior, visible, rng);
  scene.guide_noise_deg = c.guide_noise_deg;
  const SHLighting light0 = prior.reconstruct(scene.light_coeffs);

  // Sun direction in the world frame from the linear band of the luminance.
  Vec3 band = Vec3::Zero();
  for (int ch = 0; ch < 3; ++ch) band += light0.l.segment<3>(9 * ch + 1);
  const Vec3 to_sun = (cams[0].R.transpose() * -band).normalized();

  // Albedo scale keeps linear intensities below one.
  double peak = 0;
  for (const auto& g : geos) {
    for (std::size_t i = 0; i < g.fg.size(); ++i) {
      if (g.fg[i]) peak = std::max(peak, g.albedo[i].cwiseProduct(kernels::shade(g.normals[i], light0.l)).maxCoeff());
    }
  }
  const double albedo_scale = std::min(1.0, 0.9 / peak);

  const double kappa = c.guide_noise_deg > 0 ? vmf_kappa(c.guide_noise_deg) : 0;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const Geometry& g = geos[v];
    SyntheticView out;
    out.camera = cams[v];
    out.foreground = g.fg;
    out.ground = g.ground;
    out.depth = g.depth;
    out.albedo = AlbedoMap(W, H, Vec3::Zero());
    out.shadow = ShadowMap(W, H, 1.0);
    Grid<Vec3> guide(W, H, Vec3(0, 0, 1));
    for (std::size_t i = 0; i < g.fg.size(); ++i) {
      if (!g.fg[i]) continue;
      out.albedo[i] = albedo_scale * g.albedo[i];
      if (to_sun.y() < 0 && occluded(world, g.points[i], to_sun)) out.shadow[i] = 0.35;
      if (kappa > 0) {
        Vec3 n;
        do {
          n = sample_vmf(g.normals[i], kappa, rng);
        } while (n.z() <= 1e-3);
        guide[i] = n;
      } else {
        guide[i] = g.normals[i];
      }
    }
    out.normals = NormalMap(g.normals, g.fg);
    out.guide = NormalMap(guide, g.fg);
    if (v == 0) {
      out.light = light0;
    } else {
      const SHRotation M(cams[v].R * cams[0].R.transpose());
      SHVector l = M.apply(light0.l);
      for (int ch = 0; ch < 3; ++ch) l.segment<9>(9 * ch) *= c.second_view_tint[ch];
      out.light = SHLighting(l);
    }
    const ImageRGB lin = render(out.albedo, out.shadow, out.normals, out.light, out.foreground);
    const ImageRGB enc = encode_gamma(lin);
    Grid<Vec3> q(W, H);
    for (std::size_t i = 0; i < q.size(); ++i) {
      for (int ch = 0; ch < 3; ++ch) q[i][ch] = quantize8(enc.pixels[i][ch]) / 255.0;
    }
    out.image = make_gamma_image(std::move(q));
    scene.views.push_back(std::move(out));
  }
  return scene;
}

}  // namespace invrender
