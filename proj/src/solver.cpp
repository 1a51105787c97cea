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

#include "invrender/solver.hpp"

#include "invrender/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace invrender {

void SolveConfig::validate() const {
  if (stage1_iters < 0 || stage2_iters < 0) throw Error("solve config: negative iterations");
  if (!(step > 0)) throw Error("solve config: step must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw Error("solve config: decay rates must lie in [0, 1)");
  }
  if (!(epsilon > 0)) throw Error("solve config: epsilon must be positive");
  if (resolve_period < 1) throw Error("solve config: resolve_period must be >= 1");
  if (!(tolerance > 0)) throw Error("solve config: tolerance must be positive");
  if (window < 1) throw Error("solve config: window must be >= 1");
}

nlohmann::json SolveConfig::to_json() const {
  return {{"stage1_iters", stage1_iters},   {"stage2_iters", stage2_iters},
          {"step", step},                   {"beta1", beta1},
          {"beta2", beta2},                 {"epsilon", epsilon},
          {"resolve_period", resolve_period}, {"resolve_in_stage2", resolve_in_stage2},
          {"deterministic", deterministic}, {"seed", seed},
          {"tolerance", tolerance},         {"window", window}};
}

SolveConfig SolveConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("solve config: expected an object");
  SolveConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "stage1_iters") c.stage1_iters = value.get<int>();
    else if (key == "stage2_iters") c.stage2_iters = value.get<int>();
    else if (key == "step") c.step = value.get<double>();
    else if (key == "beta1") c.beta1 = value.get<double>();
    else if (key == "beta2") c.beta2 = value.get<double>();
    else if (key == "epsilon") c.epsilon = value.get<double>();
    else if (key == "resolve_period") c.resolve_period = value.get<int>();
    else if (key == "resolve_in_stage2") c.resolve_in_stage2 = value.get<bool>();
    else if (key == "deterministic") c.deterministic = value.get<bool>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "tolerance") c.tolerance = value.get<double>();
    else if (key == "window") c.window = value.get<int>();
    else throw Error("solve config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::json SolveReport::to_json() const {
  nlohmann::json trace_json = nlohmann::json::array();
  for (const auto& t : trace) {
    nlohmann::json views_json = nlohmann::json::array();
    for (const auto& bd : t.per_view) views_json.push_back(bd.to_json());
    trace_json.push_back({{"stage", t.stage},
                          {"iteration", t.iteration},
                          {"total", t.total},
                          {"per_view", views_json}});
  }
  return {{"trace", trace_json},
          {"final_energy", final_energy()},
          {"stage1_skipped", stage1_skipped},
          {"stage1_iterations", stage1_iterations},
          {"stage2_iterations", stage2_iterations},
          {"lighting_resolves", lighting_resolves},
          {"degenerate_resolves", degenerate_resolves},
          {"resolve_regressions", resolve_regressions},
          {"wall_seconds", wall_seconds},
          {"warnings", warnings}};
}

// -----------------------------------------------------------------------------

Parameters init_state(const ViewInputs& view, const PriorModel& prior) {
  const int W = view.width();
  const int H = view.height();
  Parameters p = Parameters::zeros(W, H, prior.dim());
  const double s0 = kInitCap;
  const double shadow_raw = shadow_raw_from(s0);
  Vec3 dc;
  for (int c = 0; c < 3; ++c) dc[c] = prior.mean()[9 * c];
  for (std::size_t i = 0; i < p.albedo_raw.size(); ++i) {
    Vec3 a;
    for (int c = 0; c < 3; ++c) {
      const double sf = std::min(1.0, view.linear_image[i][c] / s0);
      const double v = dc[c] > 0 ? sf / dc[c] : 1.0;
      a[c] = unsquash(std::clamp(v, 0.05, kInitCap));
    }
    p.albedo_raw[i] = a;
    p.shadow_raw[i] = shadow_raw;
    if (view.guide && view.guide->valid[i]) {
      p.normal_params[i] = params_from_normal(view.guide->normals[i]);
    }
  }
  return p;
}

double rgb_residual(const ViewInputs& view, const DecodedView& d) {
  double sum = 0;
  for (std::size_t i = 0; i < d.albedo.size(); ++i) {
    if (!view.foreground[i]) continue;
    const Vec3 x =
        d.albedo[i].cwiseProduct(kernels::shade(d.normals[i], d.light.l)) * d.shadow[i];
    sum += (x - view.linear_image[i]).squaredNorm();
  }
  return std::sqrt(sum);
}

namespace {

class Adam {
 public:
  Adam(std::size_t n, const SolveConfig& c)
      : m_(n, 0.0), v_(n, 0.0), c_(c) {}

  // Updates x where active[k] is set; frozen entries keep their moments.
  void step(std::vector<double>& x, const std::vector<double>& g,
            const std::vector<std::uint8_t>& active) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, t_);
    const double bc2 = 1.0 - std::pow(c_.beta2, t_);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!active[k]) continue;
      m_[k] = c_.beta1 * m_[k] + (1 - c_.beta1) * g[k];
      v_[k] = c_.beta2 * v_[k] + (1 - c_.beta2) * g[k] * g[k];
      x[k] -= c_.step * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + c_.epsilon);
    }
  }

 private:
  std::vector<double> m_, v_;
  const SolveConfig& c_;
  int t_ = 0;
};

void check_finite(const EnergyEval& e) {
  for (std::size_t v = 0; v < e.per_view.size(); ++v) {
    const LossBreakdown& b = e.per_view[v];
    const std::pair<const char*, double> terms[] = {{"appearance", b.appearance},
                                                    {"nm", b.nm},
                                                    {"albedo", b.albedo},
                                                    {"cross_rend", b.cross_rend},
                                                    {"lighting", b.lighting}};
    for (const auto& [name, value] : terms) {
      if (!std::isfinite(value)) {
        throw Error("solve: non-finite energy in term '" + std::string(name) +
                    "' of view " + std::to_string(v));
      }
    }
  }
  if (!std::isfinite(e.total)) throw Error("solve: non-finite total energy");
}

struct Layout {
  std::size_t pixels;
  std::size_t dim;

  std::size_t normal_begin() const { return 4 * pixels; }
  std::size_t normal_end() const { return 6 * pixels; }
  std::size_t total() const { return 6 * pixels + dim; }
};

std::vector<std::uint8_t> active_mask(const Layout& L, bool normals, bool lighting) {
  std::vector<std::uint8_t> a(L.total(), 1);
  if (!normals) std::fill(a.begin() + L.normal_begin(), a.begin() + L.normal_end(), 0);
  if (!lighting) std::fill(a.begin() + L.normal_end(), a.end(), 0);
  return a;
}

class Runner {
 public:
  Runner(const Problem& problem, std::vector<Parameters> params, const SolveConfig& c)
      : problem_(problem), params_(std::move(params)), config_(c) {
    for (const auto& p : params_) {
      layouts_.push_back({p.albedo_raw.size(), static_cast<std::size_t>(p.lighting.size())});
      adams_.emplace_back(layouts_.back().total(), config_);
    }
  }

  SolveReport run() {
    const auto start = std::chrono::steady_clock::now();
    record(0, 0, evaluate(problem_, params_, false));

    bool guided = true;
    for (const auto& v : problem_.views) guided = guided && v->guide.has_value();
    if (config_.stage1_iters > 0 && !guided) {
      report_.stage1_skipped = true;
      report_.warnings.push_back("stage 1 skipped: guide normals missing");
    } else {
      report_.stage1_iterations = run_stage(1, config_.stage1_iters, false, true);
    }
    report_.stage2_iterations =
        run_stage(2, config_.stage2_iters, true, config_.resolve_in_stage2);

    for (const auto& p : params_) {
      report_.views.push_back({decode(p, *problem_.prior), p});
    }
    report_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(report_);
  }

 private:
  void record(int stage, int iteration, const EnergyEval& e) {
    check_finite(e);
    report_.trace.push_back({stage, iteration, e.total, e.per_view});
  }

  void resolve_lighting() {
    const PriorModel& prior = *problem_.prior;
    for (std::size_t v = 0; v < params_.size(); ++v) {
      const ViewInputs& in = *problem_.views[v];
      const DecodedView d = decode(params_[v], prior);
      const double before = rgb_residual(in, d);
      const PriorLightingSolve s = solve_lighting_in_prior_linear(
          in.linear_image, d.albedo, d.shadow, d.normals, in.foreground, prior);
      ++report_.lighting_resolves;
      if (s.degenerate || !s.coeffs.allFinite()) {
        ++report_.degenerate_resolves;
        params_[v].lighting.setZero();
        continue;
      }
      params_[v].lighting = s.coeffs;
      DecodedView after = d;
      after.light = s.light;
      if (rgb_residual(in, after) > before * (1 + 1e-12) + 1e-12) {
        ++report_.resolve_regressions;
      }
    }
  }

  // Returns the number of iterations taken.
  int run_stage(int stage, int iters, bool free_normals, bool resolve) {
    std::vector<std::vector<std::uint8_t>> active;
    for (const auto& L : layouts_) active.push_back(active_mask(L, free_normals, !resolve));
    std::vector<double> energies;
    int it = 0;
    for (; it < iters; ++it) {
      if (resolve && it % config_.resolve_period == 0) resolve_lighting();
      const EnergyEval e = evaluate(problem_, params_, true);
      check_finite(e);
      energies.push_back(e.total);
      for (std::size_t v = 0; v < params_.size(); ++v) {
        std::vector<double> x = params_[v].flatten();
        adams_[v].step(x, e.gradient[v].flatten(), active[v]);
        params_[v].unflatten(x);
      }
      const std::size_t n = energies.size();
      if (n > static_cast<std::size_t>(config_.window)) {
        const double old = energies[n - 1 - config_.window];
        const double rel = (old - energies.back()) / std::max(std::abs(old), 1e-300);
        if (std::abs(rel) < config_.tolerance) {
          ++it;
          break;
        }
      }
    }
    if (iters > 0) record(stage, it, evaluate(problem_, params_, false));
    return it;
  }

  const Problem& problem_;
  std::vector<Parameters> params_;
  const SolveConfig& config_;
  std::vector<Layout> layouts_;
  std::vector<Adam> adams_;
  SolveReport report_;
};

}  // namespace

SolveReport solve(const Problem& problem, std::vector<Parameters> params,
                  const SolveConfig& config) {
  config.validate();
  if (problem.views.empty()) throw Error("solve: no views");
  if (params.size() != problem.views.size()) throw Error("solve: one parameter set per view");
  const kernels::Exec saved = kernels::default_exec();
  if (config.deterministic) kernels::set_default_exec(kernels::Exec::serial);
  try {
    SolveReport r = Runner(problem, std::move(params), config).run();
    kernels::set_default_exec(saved);
    return r;
  } catch (...) {
    kernels::set_default_exec(saved);
    throw;
  }
}

SolveReport solve_pair(std::shared_ptr<const ViewInputs> a, const PairGeometry& ga,
                       std::shared_ptr<const ViewInputs> b, const PairGeometry& gb,
                       std::shared_ptr<const PriorModel> prior,
                       const TransformSet& transforms, const LossWeights& weights,
                       const SolveConfig& config) {
  Problem p;
  p.views = {a, b};
  p.links.push_back(make_pair_link(0, 1, *a, ga, *b, gb));
  p.links.push_back(make_pair_link(1, 0, *b, gb, *a, ga));
  p.prior = prior;
  p.transforms = transforms;
  p.weights = weights;
  std::vector<Parameters> init = {init_state(*a, *prior), init_state(*b, *prior)};
  return solve(p, std::move(init), config);
}

}  // namespace invrender
