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

#include "invrender/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace invrender;
using namespace invrender::testing;

namespace {

std::shared_ptr<const PriorModel> shared_prior() {
  return std::shared_ptr<const PriorModel>(&default_prior(), [](const PriorModel*) {});
}

SyntheticScene small_scene(int views, std::uint64_t seed = 2) {
  SyntheticConfig cfg;
  cfg.width = 24;
  cfg.height = 20;
  cfg.views = views;
  cfg.seed = seed;
  return make_synthetic(cfg, default_prior());
}

Problem single_problem(const SyntheticView& v, bool with_guide = true) {
  Problem p;
  p.views.push_back(std::make_shared<ViewInputs>(ViewInputs::make(
      v.image, v.foreground, with_guide ? std::optional<NormalMap>(v.guide) : std::nullopt)));
  p.prior = shared_prior();
  p.transforms = default_transforms(p.weights);
  return p;
}

SolveConfig short_config(int s1, int s2) {
  SolveConfig c;
  c.stage1_iters = s1;
  c.stage2_iters = s2;
  c.deterministic = true;
  return c;
}

}  // namespace

TEST_CASE("solve config json round trip and validation") {
  SolveConfig c;
  c.stage1_iters = 7;
  c.step = 0.02;
  c.resolve_in_stage2 = false;
  const SolveConfig d = SolveConfig::from_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
  CHECK(SolveConfig::from_json(nlohmann::json::object()).to_json() == SolveConfig{}.to_json());
  CHECK_THROWS_AS(SolveConfig::from_json({{"learning_rate", 0.1}}), Error);
  SolveConfig bad;
  bad.step = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SolveConfig{};
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SolveConfig{};
  bad.resolve_period = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("initial state follows the shadow-free image") {
  const int W = 3, H = 1;
  Grid<Vec3> img(W, H);
  img[0] = Vec3(0.5, 0.2, 0.1);
  img[1] = Vec3(1.0, 1.0, 1.0);
  img[2] = Vec3(0.0, 0.0, 0.0);
  Grid<Vec3> g(W, H, Vec3(0, 0, 1));
  g[0] = Vec3(0.6, 0, 0.8);
  ViewInputs in;
  in.linear_image = img;
  in.foreground = full_mask(W, H);
  in.guide = NormalMap(g, full_mask(W, H));
  const PriorModel& prior = default_prior();
  const DecodedView d = decode(init_state(in, prior), prior);
  for (int i = 0; i < W; ++i) {
    CHECK(d.shadow[i] == doctest::Approx(kInitCap).epsilon(1e-9));
    CHECK((d.normals[i] - g[i]).norm() < 1e-12);
    for (int c = 0; c < 3; ++c) {
      const double dc = prior.mean()[9 * c];
      const double expect = std::clamp(std::min(1.0, img[i][c] / kInitCap) / dc, 0.05, kInitCap);
      CHECK(d.albedo[i][c] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
  CHECK(d.light.l == prior.mean());
}

TEST_CASE("zero iterations report only the initial state") {
  const SyntheticScene s = small_scene(1);
  const Problem p = single_problem(s.views[0]);
  const Parameters init = init_state(*p.views[0], default_prior());
  const SolveReport r = solve(p, {init}, short_config(0, 0));
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].stage == 0);
  CHECK(r.stage1_iterations == 0);
  CHECK(r.stage2_iterations == 0);
  CHECK(r.views[0].params.flatten() == init.flatten());
  CHECK(r.final_energy() == evaluate(p, std::vector<Parameters>{init}, false).total);
}

TEST_CASE("stage one keeps normals at the guide and never worsens a re-solve") {
  const SyntheticScene s = small_scene(1);
  const Problem p = single_problem(s.views[0]);
  const Parameters init = init_state(*p.views[0], default_prior());
  const SolveReport r = solve(p, {init}, short_config(40, 0));
  CHECK(r.stage1_iterations == 40);
  CHECK(r.lighting_resolves == 4);
  CHECK(r.resolve_regressions == 0);
  for (std::size_t i = 0; i < init.normal_params.size(); ++i) {
    CHECK((r.views[0].params.normal_params[i] - init.normal_params[i]).norm() == 0.0);
  }
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace[1].stage == 1);
  const ViewInputs& in = *p.views[0];
  CHECK(rgb_residual(in, r.views[0].decoded) < rgb_residual(in, decode(init, default_prior())));
}

TEST_CASE("stage two frees the normals") {
  const SyntheticScene s = small_scene(1);
  const Problem p = single_problem(s.views[0]);
  const Parameters init = init_state(*p.views[0], default_prior());
  const SolveReport r = solve(p, {init}, short_config(20, 40));
  REQUIRE(r.trace.size() == 3);
  CHECK(r.trace[2].stage == 2);
  CHECK(r.resolve_regressions == 0);
  double moved = 0;
  for (std::size_t i = 0; i < init.normal_params.size(); ++i) {
    moved += (r.views[0].params.normal_params[i] - init.normal_params[i]).norm();
  }
  CHECK(moved > 0);
  const auto j = r.to_json();
  CHECK(j["trace"].size() == 3);
  CHECK(j["stage2_iterations"] == 40);
}

TEST_CASE("stage two warm start does not increase the energy") {
  const SyntheticScene s = small_scene(1, 3);
  const Problem p = single_problem(s.views[0]);
  SolveConfig c;
  c.deterministic = true;
  const SolveReport first = solve(p, {init_state(*p.views[0], default_prior())}, c);
  SolveConfig again = c;
  again.stage1_iters = 0;
  const SolveReport second = solve(p, {first.views[0].params}, again);
  CHECK(second.trace[0].total == first.final_energy());
  CHECK(second.final_energy() <= first.final_energy() * (1 + c.tolerance));
}

TEST_CASE("deterministic solves are bit-identical") {
  const SyntheticScene s = small_scene(1, 5);
  const Problem p = single_problem(s.views[0]);
  const Parameters init = init_state(*p.views[0], default_prior());
  const SolveConfig c = short_config(15, 25);
  const kernels::Exec before = kernels::default_exec();
  const SolveReport a = solve(p, {init}, c);
  const SolveReport b = solve(p, {init}, c);
  CHECK(a.views[0].params.flatten() == b.views[0].params.flatten());
  CHECK(a.final_energy() == b.final_energy());
  CHECK(kernels::default_exec() == before);
}

TEST_CASE("missing guide skips stage one with a warning") {
  const SyntheticScene s = small_scene(1);
  const Problem p = single_problem(s.views[0], false);
  const SolveReport r =
      solve(p, {init_state(*p.views[0], default_prior())}, short_config(10, 5));
  CHECK(r.stage1_skipped);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.stage1_iterations == 0);
  CHECK(r.stage2_iterations == 5);
}

TEST_CASE("degenerate geometry falls back to the prior mean") {
  const SyntheticScene s = small_scene(1);
  const SyntheticView& v = s.views[0];
  Problem p;
  Grid<Vec3> flat(v.guide.width(), v.guide.height(), Vec3(0, 0, 1));
  p.views.push_back(std::make_shared<ViewInputs>(
      ViewInputs::make(v.image, v.foreground, NormalMap(flat, v.foreground))));
  p.prior = shared_prior();
  p.transforms = default_transforms(p.weights);
  const SolveReport r =
      solve(p, {init_state(*p.views[0], default_prior())}, short_config(10, 0));
  CHECK(r.degenerate_resolves == 1);
  CHECK(r.views[0].params.lighting.norm() == 0.0);
}

TEST_CASE("identical views give identical pair results") {
  const SyntheticScene s = small_scene(1, 3);
  const SyntheticView& v = s.views[0];
  auto in = std::make_shared<ViewInputs>(ViewInputs::make(v.image, v.foreground, v.guide));
  const PairGeometry g{v.depth, v.camera};
  LossWeights w;
  const SolveReport r = solve_pair(in, g, in, g, shared_prior(), default_transforms(w), w,
                                   short_config(10, 10));
  REQUIRE(r.views.size() == 2);
  const auto a = r.views[0].params.flatten();
  const auto b = r.views[1].params.flatten();
  REQUIRE(a.size() == b.size());
  double diff = 0;
  for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, std::abs(a[k] - b[k]));
  CHECK(diff < 1e-12);
  double albedo = 0;
  for (std::size_t i = 0; i < r.views[0].decoded.albedo.size(); ++i) {
    albedo = std::max(albedo, (r.views[0].decoded.albedo[i] - r.views[1].decoded.albedo[i]).cwiseAbs().maxCoeff());
  }
  CHECK(albedo < 1e-4);
  const auto& bd = r.trace.back().per_view;
  CHECK(bd[0].total == doctest::Approx(bd[1].total).epsilon(1e-12));
  CHECK(bd[0].has_albedo);
}

TEST_CASE("albedo consistency weight ablation") {
  const SyntheticScene s = small_scene(2, 4);
  const auto& a = s.views[0];
  const auto& b = s.views[1];
  auto ia = std::make_shared<ViewInputs>(ViewInputs::make(a.image, a.foreground, a.guide));
  auto ib = std::make_shared<ViewInputs>(ViewInputs::make(b.image, b.foreground, b.guide));
  LossWeights on;
  LossWeights off = on;
  off.albedo = 0;
  const SolveConfig c = short_config(10, 20);
  const SolveReport r_on = solve_pair(ia, {a.depth, a.camera}, ib, {b.depth, b.camera},
                                      shared_prior(), default_transforms(on), on, c);
  const SolveReport r_off = solve_pair(ia, {a.depth, a.camera}, ib, {b.depth, b.camera},
                                       shared_prior(), default_transforms(off), off, c);
  for (const auto& bd : r_off.trace.back().per_view) CHECK(bd.albedo == 0.0);
  for (const auto& bd : r_on.trace.back().per_view) CHECK(bd.albedo > 0.0);
  CHECK(r_on.views[0].params.flatten() != r_off.views[0].params.flatten());
}
