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

#include "invrender/energy.hpp"

#include "invrender/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace invrender {

ViewInputs ViewInputs::make(const ImageRGB& image, Mask foreground,
                            std::optional<NormalMap> guide) {
  require_same_shape(image.pixels, foreground, "view inputs");
  if (guide) require_same_shape(image.pixels, guide->normals, "view inputs");
  ViewInputs v;
  v.linear_image = linearize(image).pixels;
  v.foreground = std::move(foreground);
  v.guide = std::move(guide);
  return v;
}

// -----------------------------------------------------------------------------

Parameters Parameters::zeros(int width, int height, int prior_dim) {
  Parameters p;
  p.albedo_raw = Grid<Vec3>(width, height, Vec3::Zero());
  p.shadow_raw = Grid<double>(width, height, 0.0);
  p.normal_params = NormalParams(width, height, Vec2::Zero());
  p.lighting = Eigen::VectorXd::Zero(prior_dim);
  return p;
}

std::size_t Parameters::size() const {
  return 6 * albedo_raw.size() + static_cast<std::size_t>(lighting.size());
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> v;
  v.reserve(size());
  for (const auto& a : albedo_raw.data()) v.insert(v.end(), {a[0], a[1], a[2]});
  v.insert(v.end(), shadow_raw.data().begin(), shadow_raw.data().end());
  for (const auto& n : normal_params.data()) v.insert(v.end(), {n[0], n[1]});
  v.insert(v.end(), lighting.data(), lighting.data() + lighting.size());
  return v;
}

void Parameters::unflatten(std::span<const double> v) {
  if (v.size() != size()) throw Error("parameters: flat size mismatch");
  std::size_t k = 0;
  for (auto& a : albedo_raw.data()) {
    a = Vec3(v[k], v[k + 1], v[k + 2]);
    k += 3;
  }
  for (auto& s : shadow_raw.data()) s = v[k++];
  for (auto& n : normal_params.data()) {
    n = Vec2(v[k], v[k + 1]);
    k += 2;
  }
  for (Eigen::Index i = 0; i < lighting.size(); ++i) lighting[i] = v[k++];
}

double squash(double raw) { return 0.5 * (std::tanh(raw) + 1.0); }

double squash_derivative(double raw) {
  const double t = std::tanh(raw);
  return 0.5 * (1.0 - t * t);
}

double unsquash(double value) {
  const double v = std::clamp(value, 1e-9, 1.0 - 1e-9);
  return std::atanh(2.0 * v - 1.0);
}

double shadow_from_raw(double raw) {
  return kShadowFloor + (1.0 - kShadowFloor) * squash(raw);
}

double shadow_raw_from(double shadow) {
  return unsquash((shadow - kShadowFloor) / (1.0 - kShadowFloor));
}

DecodedView decode(const Parameters& params, const PriorModel& prior) {
  const int W = params.albedo_raw.width();
  const int H = params.albedo_raw.height();
  DecodedView d{AlbedoMap(W, H, Vec3::Zero()), ShadowMap(W, H, 0.0),
                Grid<Vec3>(W, H, Vec3::Zero()), prior.reconstruct(params.lighting)};
  for (std::size_t i = 0; i < d.albedo.size(); ++i) {
    const Vec3& a = params.albedo_raw[i];
    d.albedo[i] = Vec3(squash(a[0]), squash(a[1]), squash(a[2]));
    d.shadow[i] = shadow_from_raw(params.shadow_raw[i]);
    const Vec2& pq = params.normal_params[i];
    d.normals[i] = normal_from_params(pq[0], pq[1]);
  }
  return d;
}

NormalMap decoded_normal_map(const DecodedView& d, const Mask& mask) {
  return NormalMap(d.normals, mask);
}

// -----------------------------------------------------------------------------

Grid<Vec3> shadow_free(const Grid<Vec3>& linear_image, const ShadowMap& shadow) {
  require_same_shape(linear_image, shadow, "shadow_free");
  Grid<Vec3> out(linear_image.width(), linear_image.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = std::max(shadow[i], kShadowFloor);
    out[i] = (linear_image[i] / s).cwiseMin(1.0);
  }
  return out;
}

ImageRGB shadow_free(const ImageRGB& image, const ShadowMap& shadow) {
  return ImageRGB(shadow_free(linearize(image).pixels, shadow), Encoding::linear);
}

namespace {

// d/ds of min(1, i / s) summed against g.
double shadow_free_backward(const Vec3& img, double s, const Vec3& g) {
  double acc = 0;
  for (int c = 0; c < 3; ++c) {
    if (img[c] / s < 1.0) acc -= g[c] * img[c] / (s * s);
  }
  return acc;
}

}  // namespace

double normal_supervision_loss(const NormalMap& est, const NormalMap& guide,
                               Grid<Vec3>* grad, double scale) {
  require_same_shape(est.normals, guide.normals, "normal_supervision_loss");
  std::size_t n = 0;
  for (std::size_t i = 0; i < est.normals.size(); ++i) n += est.valid[i] && guide.valid[i];
  if (n == 0) throw Error("normal_supervision_loss: empty joint mask");
  const double lo = -1.0 + kAngleClamp;
  const double hi = 1.0 - kAngleClamp;
  double sum = 0;
  for (std::size_t i = 0; i < est.normals.size(); ++i) {
    if (!est.valid[i] || !guide.valid[i]) continue;
    const double c = guide.normals[i].dot(est.normals[i]);
    const double cc = std::clamp(c, lo, hi);
    sum += std::acos(cc);
    if (grad && c > lo && c < hi) {
      (*grad)[i] -= (scale / static_cast<double>(n)) / std::sqrt(1.0 - c * c) *
                    guide.normals[i];
    }
  }
  return sum / static_cast<double>(n);
}

// -----------------------------------------------------------------------------

PairLink make_pair_link(int target, int source, const ViewInputs& target_view,
                        const PairGeometry& target_geo, const ViewInputs& source_view,
                        const PairGeometry& source_geo) {
  require_same_shape(target_view.linear_image, target_geo.depth, "pair link");
  require_same_shape(source_view.linear_image, source_geo.depth, "pair link");
  Mask src_valid(source_view.width(), source_view.height(), 0);
  for (std::size_t i = 0; i < src_valid.size(); ++i) {
    src_valid[i] = source_view.foreground[i] && std::isfinite(source_geo.depth[i]);
  }
  const PixelCorrespondence corr =
      correspond(target_geo.depth, target_geo.camera, source_geo.camera,
                 source_view.width(), source_view.height());
  PairLink link;
  link.target = target;
  link.source = source;
  link.resampler = Resampler(corr, src_valid);
  link.projected_image = link.resampler.apply(source_view.linear_image);
  link.projected_image_valid = link.resampler.valid();
  link.rotation = SHRotation(target_geo.camera.R * source_geo.camera.R.transpose());
  return link;
}

// -----------------------------------------------------------------------------

namespace {

struct DecodedGrad {
  Grid<Vec3> albedo;
  Grid<double> shadow;
  Grid<Vec3> normal;
  SHVector light = SHVector::Zero();
  Eigen::VectorXd coeffs;

  DecodedGrad(int W, int H, int D)
      : albedo(W, H, Vec3::Zero()),
        shadow(W, H, 0.0),
        normal(W, H, Vec3::Zero()),
        coeffs(Eigen::VectorXd::Zero(D)) {}

  void add(const DecodedGrad& o) {
    for (std::size_t i = 0; i < albedo.size(); ++i) {
      albedo[i] += o.albedo[i];
      shadow[i] += o.shadow[i];
      normal[i] += o.normal[i];
    }
    light += o.light;
    coeffs += o.coeffs;
  }
};

// x = albedo * B(n) l on the mask.
Grid<Vec3> unshadowed_render(const DecodedView& d, const SHVector& l, const Mask& mask) {
  Grid<Vec3> x(d.albedo.width(), d.albedo.height(), Vec3::Zero());
  const std::vector<double> ones(d.albedo.size(), 1.0);
  kernels::render(d.albedo.data(), ones, d.normals.data(), l, mask.data(), x.data(),
                  kernels::default_exec());
  return x;
}

// Pushes d/dx of an unshadowed render into albedo, normal and lighting grads.
void unshadowed_render_backward(const DecodedView& d, const SHVector& l,
                                const Grid<Vec3>& gx, const Mask& mask,
                                Grid<Vec3>& g_albedo, Grid<Vec3>& g_normal,
                                SHVector& g_light) {
  const std::size_t n = d.albedo.size();
  std::vector<Vec3> ga(n), gn(n);
  std::vector<SHVector> gl(n);
  kernels::shade_backward(d.albedo.data(), d.normals.data(), l, gx.data(), mask.data(),
                          ga, gn, gl, kernels::default_exec());
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    g_albedo[i] += ga[i];
    g_normal[i] += gn[i];
    g_light += gl[i];
  }
}

struct ViewTerms {
  double appearance = 0;
  double nm = 0;
  bool has_nm = false;
};

ViewTerms view_terms(const ViewInputs& in, const DecodedView& d,
                     const TransformSet& transforms, const LossWeights& w,
                     double view_scale, DecodedGrad* g) {
  ViewTerms t;
  const Mask& fg = in.foreground;
  const Grid<Vec3> x = unshadowed_render(d, d.light.l, fg);
  const Grid<Vec3> y = shadow_free(in.linear_image, d.shadow);
  if (g) {
    Grid<Vec3> gx(x.width(), x.height(), Vec3::Zero());
    Grid<Vec3> gy(x.width(), x.height(), Vec3::Zero());
    t.appearance = perceptual_error(x, y, fg, transforms, &gx, &gy, w.appearance * view_scale);
    unshadowed_render_backward(d, d.light.l, gx, fg, g->albedo, g->normal, g->light);
    for (std::size_t i = 0; i < fg.size(); ++i) {
      if (fg[i]) g->shadow[i] += shadow_free_backward(in.linear_image[i], d.shadow[i], gy[i]);
    }
  } else {
    t.appearance = perceptual_error(x, y, fg, transforms);
  }
  if (in.guide) {
    NormalMap est(d.normals, fg);
    t.nm = normal_supervision_loss(est, *in.guide, g ? &g->normal : nullptr,
                                   w.nm * view_scale);
    t.has_nm = true;
  }
  return t;
}

double link_albedo(const PairLink& link, const ViewInputs& target,
                   const DecodedView& dt, const DecodedView& ds,
                   const TransformSet& transforms, double scale, DecodedGrad* gt,
                   DecodedGrad* gs) {
  const Grid<Vec3> proj = link.resampler.apply(ds.albedo);
  const Mask mask = mask_and(target.foreground, link.resampler.valid());
  if (count(mask) == 0) throw Error("albedo consistency: empty joint mask");
  if (!gt) return perceptual_error(dt.albedo, proj, mask, transforms);
  Grid<Vec3> gproj(proj.width(), proj.height(), Vec3::Zero());
  const double v =
      perceptual_error(dt.albedo, proj, mask, transforms, &gt->albedo, &gproj, scale);
  link.resampler.accumulate_adjoint(gproj, gs->albedo);
  return v;
}

double link_cross_render(const PairLink& link, const ViewInputs& target,
                         const DecodedView& dt, const DecodedView& ds,
                         const TransformSet& transforms, double scale,
                         DecodedGrad* gt, DecodedGrad* gs) {
  const Grid<double> proj_shadow = link.resampler.apply(ds.shadow);
  Mask mask = mask_and(target.foreground, link.resampler.valid());
  mask = mask_and(mask, link.projected_image_valid);
  if (count(mask) == 0) throw Error("cross rendering: empty joint mask");
  Grid<Vec3> y(proj_shadow.width(), proj_shadow.height(), Vec3::Zero());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mask[i]) y[i] = (link.projected_image[i] / proj_shadow[i]).cwiseMin(1.0);
  }
  const SHVector l_rot = link.rotation.apply(ds.light.l);
  const Grid<Vec3> x = unshadowed_render(dt, l_rot, mask);
  if (!gt) return perceptual_error(x, y, mask, transforms);
  Grid<Vec3> gx(x.width(), x.height(), Vec3::Zero());
  Grid<Vec3> gy(x.width(), x.height(), Vec3::Zero());
  const double v = perceptual_error(x, y, mask, transforms, &gx, &gy, scale);
  SHVector g_rot = SHVector::Zero();
  unshadowed_render_backward(dt, l_rot, gx, mask, gt->albedo, gt->normal, g_rot);
  gs->light += link.rotation.apply_transpose(g_rot);
  Grid<double> g_proj_shadow(y.width(), y.height(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mask[i]) {
      g_proj_shadow[i] = shadow_free_backward(link.projected_image[i], proj_shadow[i], gy[i]);
    }
  }
  link.resampler.accumulate_adjoint(g_proj_shadow, gs->shadow);
  return v;
}

Parameters chain_to_raw(const Parameters& p, const DecodedGrad& g, const PriorModel& prior) {
  Parameters out = Parameters::zeros(p.albedo_raw.width(), p.albedo_raw.height(),
                                     static_cast<int>(p.lighting.size()));
  for (std::size_t i = 0; i < p.albedo_raw.size(); ++i) {
    const Vec3& a = p.albedo_raw[i];
    for (int c = 0; c < 3; ++c) out.albedo_raw[i][c] = g.albedo[i][c] * squash_derivative(a[c]);
    out.shadow_raw[i] =
        g.shadow[i] * (1.0 - kShadowFloor) * squash_derivative(p.shadow_raw[i]);
    const Vec2& pq = p.normal_params[i];
    out.normal_params[i] =
        normal_from_params_jacobian(pq[0], pq[1]).transpose() * g.normal[i];
  }
  out.lighting = prior.scaled_basis().transpose() * g.light + g.coeffs;
  return out;
}

}  // namespace

EnergyEval evaluate(const Problem& problem, std::span<const Parameters> params,
                    bool with_gradient) {
  const auto V = problem.views.size();
  if (params.size() != V) throw Error("evaluate: one parameter set per view");
  if (!problem.prior) throw Error("evaluate: missing prior");
  const PriorModel& prior = *problem.prior;
  const LossWeights& w = problem.weights;
  const double view_scale = 1.0 / static_cast<double>(V);

  std::vector<DecodedView> decoded;
  // Contributions a view receives as a link source are kept apart and added
  // last, so the summation order depends only on each view's role.
  std::vector<DecodedGrad> grads, source_grads;
  for (std::size_t v = 0; v < V; ++v) {
    require_same_shape(problem.views[v]->linear_image, params[v].albedo_raw, "evaluate");
    decoded.push_back(decode(params[v], prior));
    if (with_gradient) {
      const int W = params[v].albedo_raw.width();
      const int H = params[v].albedo_raw.height();
      grads.emplace_back(W, H, prior.dim());
      source_grads.emplace_back(W, H, prior.dim());
    }
  }

  EnergyEval out;
  out.per_view.resize(V);
  for (std::size_t v = 0; v < V; ++v) {
    LossBreakdown& bd = out.per_view[v];
    bd.weights = w;
    const ViewTerms t = view_terms(*problem.views[v], decoded[v], problem.transforms, w,
                                   view_scale, with_gradient ? &grads[v] : nullptr);
    bd.appearance = t.appearance;
    bd.nm = t.nm;
    bd.has_nm = t.has_nm;
    bd.lighting = prior_loss(params[v].lighting);
    if (with_gradient) grads[v].coeffs += w.lighting * view_scale * prior_loss_gradient(params[v].lighting);
  }

  std::vector<int> links_into(V, 0);
  for (const auto& link : problem.links) {
    if (link.target < 0 || link.source < 0 || static_cast<std::size_t>(link.target) >= V ||
        static_cast<std::size_t>(link.source) >= V) {
      throw Error("evaluate: link refers to a missing view");
    }
    ++links_into[link.target];
  }
  for (const auto& link : problem.links) {
    const auto t = static_cast<std::size_t>(link.target);
    const auto s = static_cast<std::size_t>(link.source);
    const double per_link = 1.0 / links_into[t];
    DecodedGrad* gt = with_gradient ? &grads[t] : nullptr;
    DecodedGrad* gs = with_gradient ? &source_grads[s] : nullptr;
    LossBreakdown& bd = out.per_view[t];
    if (w.albedo > 0) {
      bd.albedo += per_link * link_albedo(link, *problem.views[t], decoded[t], decoded[s],
                                          problem.transforms,
                                          w.albedo * view_scale * per_link, gt, gs);
    }
    bd.has_albedo = true;
    if (w.cross_rend > 0) {
      bd.cross_rend += per_link * link_cross_render(link, *problem.views[t], decoded[t],
                                                    decoded[s], problem.transforms,
                                                    w.cross_rend * view_scale * per_link,
                                                    gt, gs);
    }
    bd.has_cross_rend = true;
  }

  for (auto& bd : out.per_view) {
    bd.total = w.appearance * bd.appearance + w.nm * bd.nm + w.albedo * bd.albedo +
               w.cross_rend * bd.cross_rend + w.lighting * bd.lighting;
    out.total += view_scale * bd.total;
  }
  if (with_gradient) {
    for (std::size_t v = 0; v < V; ++v) {
      grads[v].add(source_grads[v]);
      out.gradient.push_back(chain_to_raw(params[v], grads[v], prior));
    }
  }
  return out;
}

LossBreakdown total_loss(const Problem& problem, std::span<const Parameters> params,
                         int view) {
  const EnergyEval e = evaluate(problem, params, false);
  return e.per_view.at(static_cast<std::size_t>(view));
}

double appearance_loss(const EnergyState& state, const PriorModel& prior,
                       const TransformSet& transforms) {
  const DecodedView d = decode(state.params, prior);
  const ViewTerms t = view_terms(*state.inputs, d, transforms, LossWeights{}, 1.0, nullptr);
  return t.appearance;
}

double albedo_consistency_loss(const AlbedoMap& albedo_target,
                               const AlbedoMap& albedo_source, const PairLink& link,
                               const Mask& target_foreground,
                               const TransformSet& transforms) {
  const Grid<Vec3> proj = link.resampler.apply(albedo_source);
  const Mask mask = mask_and(target_foreground, link.resampler.valid());
  if (count(mask) == 0) throw Error("albedo consistency: empty joint mask");
  return perceptual_error(albedo_target, proj, mask, transforms);
}

double cross_render_loss(const EnergyState& target, const ShadowMap& source_shadow,
                         const SHLighting& source_light, const PairLink& link,
                         const PriorModel& prior, const TransformSet& transforms) {
  DecodedView dt = decode(target.params, prior);
  DecodedView ds;
  ds.shadow = source_shadow;
  ds.light = source_light;
  return link_cross_render(link, *target.inputs, dt, ds, transforms, 1.0, nullptr, nullptr);
}

nlohmann::json LossBreakdown::to_json() const {
  nlohmann::json j;
  j["appearance"] = appearance;
  j["nm"] = has_nm ? nlohmann::json(nm) : nlohmann::json(nullptr);
  j["albedo"] = has_albedo ? nlohmann::json(albedo) : nlohmann::json(nullptr);
  j["cross_rend"] = has_cross_rend ? nlohmann::json(cross_rend) : nlohmann::json(nullptr);
  j["lighting"] = lighting;
  j["total"] = total;
  j["weights"] = {{"w1", weights.appearance}, {"w2", weights.nm},
                  {"w3", weights.albedo},     {"w4", weights.cross_rend},
                  {"w5", weights.lighting},   {"w_vgg", weights.vgg},
                  {"w_lab", weights.lab}};
  return j;
}

}  // namespace invrender
