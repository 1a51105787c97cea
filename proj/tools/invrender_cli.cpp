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

// Command-line front end. Every subcommand reports failures as a JSON object
// on stderr and exits nonzero.

#include "invrender/energy.hpp"
#include "invrender/io.hpp"
#include "invrender/pipeline.hpp"
#include "invrender/prior.hpp"
#include "invrender/shlight.hpp"
#include "invrender/solver.hpp"
#include "invrender/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using namespace invrender;

namespace {

std::shared_ptr<const PriorModel> load_prior(const std::string& path) {
  if (path.empty()) return std::shared_ptr<const PriorModel>(&default_prior(), [](auto*) {});
  return std::make_shared<PriorModel>(prior_from_json(read_json(path)));
}

Mask read_mask_any(const std::string& path, int w, int h) {
  if (path.empty()) return full_mask(w, h);
  return read_mask_png(path);
}

ImageRGB read_image_any(const std::string& path) {
  if (fs::path(path).extension() == ".pfm") {
    return ImageRGB(read_pfm_rgb(path), Encoding::linear);
  }
  return read_png(path);
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

// --- scene directories -------------------------------------------------------

void write_view_dir(const fs::path& dir, const SyntheticView& v) {
  fs::create_directories(dir);
  write_png((dir / "image.png").string(), v.image);
  Mask sky(v.foreground.width(), v.foreground.height(), 0);
  for (std::size_t i = 0; i < sky.size(); ++i) sky[i] = !v.foreground[i];
  write_mask_png((dir / "sky.png").string(), sky);
  write_mask_png((dir / "mask.png").string(), v.foreground);
  write_mask_png((dir / "ground.png").string(), v.ground);
  write_pfm((dir / "depth.pfm").string(), v.depth);
  write_json((dir / "camera.json").string(), to_json(v.camera));
  write_normals_pfm((dir / "guide.pfm").string(), v.guide);
  write_pfm((dir / "gt_albedo.pfm").string(), v.albedo);
  write_pfm((dir / "gt_shadow.pfm").string(), v.shadow);
  write_normals_pfm((dir / "gt_normals.pfm").string(), v.normals);
  write_json((dir / "gt_lighting.json").string(), to_json(v.light));
  ViewRecord rec;
  rec.image = "image.png";
  rec.camera = v.camera;
  rec.depth = "depth.pfm";
  rec.sky_mask = "sky.png";
  rec.ground_mask = "ground.png";
  rec.guide_normals = "guide.pfm";
  write_json((dir / "view.json").string(), {{"views", {rec.to_json()}}});
}

void write_solution_dir(const fs::path& dir, const DecodedView& d, const Mask& fg) {
  fs::create_directories(dir);
  write_pfm((dir / "albedo.pfm").string(), d.albedo);
  write_pfm((dir / "shadow.pfm").string(), d.shadow);
  write_normals_pfm((dir / "normals.pfm").string(), NormalMap(d.normals, fg));
  write_json((dir / "lighting.json").string(), to_json(d.light));
  write_png((dir / "albedo.png").string(), ImageRGB(d.albedo, Encoding::linear));
}

struct ViewSetup {
  std::shared_ptr<ViewInputs> inputs;
  PairGeometry geometry;
};

ViewSetup setup_view(const std::string& record_path,
                     const std::optional<GroundPlane>& plane) {
  const auto records = load_records(record_path);
  if (records.size() != 1) throw Error(record_path + ": expected exactly one view");
  LoadedView v = load_view(records[0]);
  if (!v.guide) v.guide = guide_normals(v.depth, v.camera, plane ? v.ground : std::nullopt, plane);
  ViewSetup s;
  s.inputs = std::make_shared<ViewInputs>(ViewInputs::make(v.image, v.foreground, v.guide));
  s.geometry = {v.depth, v.camera};
  return s;
}

// --- subcommands ---------------------------------------------------------------

struct RenderArgs {
  std::string scene, albedo, shadow, normals, lighting, mask, out, out_pfm;
};

void cmd_render(const RenderArgs& a) {
  RenderArgs r = a;
  if (!a.scene.empty()) {
    const fs::path d(a.scene);
    auto pick = [&](std::string& field, const char* name) {
      if (field.empty()) field = (d / name).string();
    };
    pick(r.albedo, "gt_albedo.pfm");
    pick(r.shadow, "gt_shadow.pfm");
    pick(r.normals, "gt_normals.pfm");
    pick(r.lighting, "gt_lighting.json");
    pick(r.mask, "mask.png");
  }
  if (r.albedo.empty() || r.normals.empty() || r.lighting.empty()) {
    throw Error("render: --albedo, --normals and --lighting (or --scene) are required");
  }
  const AlbedoMap albedo = read_pfm_rgb(r.albedo);
  const NormalMap normals = read_normals_pfm(r.normals);
  const ShadowMap shadow =
      r.shadow.empty() ? ShadowMap(albedo.width(), albedo.height(), 1.0) : read_pfm_gray(r.shadow);
  Mask mask = r.mask.empty() ? normals.valid : read_mask_png(r.mask);
  const SHLighting light = lighting_from_json(read_json(r.lighting));
  const ImageRGB img = render(albedo, shadow, normals, light, mask);
  write_png(r.out, img);
  if (!r.out_pfm.empty()) write_pfm(r.out_pfm, img.pixels);
  print({{"image", r.out}, {"width", img.width()}, {"height", img.height()}});
}

struct SolveLightArgs {
  std::string image, albedo, shadow, normals, mask, prior, out;
  bool in_prior = false;
};

void cmd_solve_light(const SolveLightArgs& a) {
  const ImageRGB img = read_image_any(a.image);
  const AlbedoMap albedo = read_pfm_rgb(a.albedo);
  const ShadowMap shadow = a.shadow.empty() ? ShadowMap(albedo.width(), albedo.height(), 1.0)
                                            : read_pfm_gray(a.shadow);
  const NormalMap normals = read_normals_pfm(a.normals);
  const Mask mask = mask_and(read_mask_any(a.mask, img.width(), img.height()), normals.valid);
  nlohmann::json out;
  if (a.in_prior) {
    const auto prior = load_prior(a.prior);
    const PriorLightingSolve s = solve_lighting_in_prior(img, albedo, shadow, normals, mask, *prior);
    write_json(a.out, to_json(s.light));
    out = {{"degenerate", s.degenerate}, {"rank", s.rank}, {"residual", s.residual},
           {"coeffs", std::vector<double>(s.coeffs.data(), s.coeffs.data() + s.coeffs.size())}};
  } else {
    const LightingSolve s = solve_lighting(img, albedo, shadow, normals, mask);
    write_json(a.out, to_json(s.light));
    out = {{"degenerate", s.degenerate}, {"rank", s.rank}, {"residual", s.residual}};
  }
  out["lighting"] = a.out;
  print(out);
}

struct InvrenderArgs {
  std::string view, pair, out, config = "default", prior, ground_plane;
  std::vector<std::string> transforms;
  bool deterministic = false;
  int stage1 = -1, stage2 = -1;
  double w_albedo = -1, w_cross = -1;
};

void cmd_invrender(const InvrenderArgs& a) {
  SolveConfig cfg;
  if (a.config != "default") cfg = SolveConfig::from_json(read_json(a.config));
  if (a.deterministic) cfg.deterministic = true;
  if (a.stage1 >= 0) cfg.stage1_iters = a.stage1;
  if (a.stage2 >= 0) cfg.stage2_iters = a.stage2;
  cfg.validate();
  LossWeights w;
  if (a.w_albedo >= 0) w.albedo = a.w_albedo;
  if (a.w_cross >= 0) w.cross_rend = a.w_cross;
  w.validate();
  std::optional<GroundPlane> plane;
  if (!a.ground_plane.empty()) {
    const nlohmann::json j = read_json(a.ground_plane);
    const auto n = j.at("normal").get<std::vector<double>>();
    if (n.size() != 3) throw Error("ground plane: normal must have 3 entries");
    plane = GroundPlane{Vec3(n[0], n[1], n[2]).normalized(), j.at("offset").get<double>()};
  }
  const auto prior = load_prior(a.prior);
  const TransformSet transforms =
      a.transforms.empty() ? default_transforms(w) : make_transforms(a.transforms, w);

  const ViewSetup v0 = setup_view(a.view, plane);
  const fs::path out(a.out);
  SolveReport report;
  std::vector<std::shared_ptr<ViewInputs>> inputs = {v0.inputs};
  if (a.pair.empty()) {
    Problem p;
    p.views = {v0.inputs};
    p.prior = prior;
    p.transforms = transforms;
    p.weights = w;
    report = solve(p, {init_state(*v0.inputs, *prior)}, cfg);
    write_solution_dir(out, report.views[0].decoded, v0.inputs->foreground);
  } else {
    const ViewSetup v1 = setup_view(a.pair, plane);
    inputs.push_back(v1.inputs);
    report = solve_pair(v0.inputs, v0.geometry, v1.inputs, v1.geometry, prior, transforms, w, cfg);
    for (std::size_t k = 0; k < 2; ++k) {
      write_solution_dir(out / ("view" + std::to_string(k)), report.views[k].decoded,
                         inputs[k]->foreground);
    }
  }
  nlohmann::json rj = report.to_json();
  rj["config"] = cfg.to_json();
  if (cfg.deterministic) rj.erase("wall_seconds");
  write_json((out / "report.json").string(), rj);
  print({{"out", a.out},
         {"final_energy", report.final_energy()},
         {"stage1_iterations", report.stage1_iterations},
         {"stage2_iterations", report.stage2_iterations},
         {"wall_seconds", report.wall_seconds}});
}

struct BuildPriorArgs {
  std::string envs, out;
  int synthetic = 0;
  int dim = kPriorDim;
};

void cmd_build_prior(const BuildPriorArgs& a) {
  std::vector<EnvMap> envs;
  if (!a.envs.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.envs)) {
      if (e.path().extension() == ".pfm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) envs.emplace_back(read_pfm_rgb(f.string()));
  }
  if (a.synthetic > 0) {
    auto more = default_env_maps(a.synthetic);
    envs.insert(envs.end(), more.begin(), more.end());
  }
  if (envs.empty()) throw Error("build-prior: no environment maps (use --envs or --synthetic)");
  const auto samples = augmented_samples(envs);
  const PriorModel prior = build_prior(samples, a.dim);
  write_json(a.out, to_json(prior));
  const auto& s = prior.sigma();
  print({{"env_maps", envs.size()},
         {"samples", samples.size()},
         {"dim", prior.dim()},
         {"sigma", std::vector<double>(s.data(), s.data() + s.size())},
         {"prior", a.out}});
}

struct CrossProjectArgs {
  std::string src, src_mask, src_camera, tgt_depth, tgt_camera, out, out_mask;
};

void cmd_cross_project(const CrossProjectArgs& a) {
  const ImageRGB src = read_image_any(a.src);
  const Grid<Vec3> lin = linearize(src).pixels;
  const Mask src_mask = read_mask_any(a.src_mask, src.width(), src.height());
  const auto [proj, valid] =
      cross_project(lin, src_mask, read_pfm_gray(a.tgt_depth),
                    camera_from_json(read_json(a.src_camera)),
                    camera_from_json(read_json(a.tgt_camera)));
  write_pfm(a.out, proj);
  if (!a.out_mask.empty()) write_mask_png(a.out_mask, valid);
  print({{"out", a.out}, {"valid_pixels", count(valid)}});
}

struct PairSelectArgs {
  std::string records, out;
  PairThresholds th;
  double max_camera_distance = -1;
};

void cmd_pair_select(const PairSelectArgs& a) {
  std::vector<PairView> views;
  for (const auto& r : load_records(a.records)) {
    LoadedView v = load_view(r);
    views.push_back({linearize(v.image).pixels, v.foreground, v.depth, v.camera});
  }
  PairThresholds th = a.th;
  if (a.max_camera_distance > 0) th.max_camera_distance = a.max_camera_distance;
  const auto pairs = select_pairs(views, th);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [i, k] : pairs) j.push_back({i, k});
  if (!a.out.empty()) write_json(a.out, {{"pairs", j}});
  print({{"pairs", j}});
}

struct EvaluateArgs {
  std::string pred, ref, mask;
  std::string pred_albedo, ref_albedo, pred_normals, ref_normals, pred_lighting, ref_lighting;
  std::string image;
};

void cmd_evaluate(const EvaluateArgs& a) {
  EvaluateArgs e = a;
  auto pick = [](std::string& field, const std::string& dir, const char* name) {
    if (field.empty() && !dir.empty() && fs::exists(fs::path(dir) / name)) {
      field = (fs::path(dir) / name).string();
    }
  };
  pick(e.pred_albedo, a.pred, "albedo.pfm");
  pick(e.pred_normals, a.pred, "normals.pfm");
  pick(e.pred_lighting, a.pred, "lighting.json");
  pick(e.ref_albedo, a.ref, "gt_albedo.pfm");
  pick(e.ref_normals, a.ref, "gt_normals.pfm");
  pick(e.ref_lighting, a.ref, "gt_lighting.json");
  pick(e.mask, a.ref, "mask.png");

  MetricsReport m;
  if (!e.pred_albedo.empty() && !e.ref_albedo.empty()) {
    const AlbedoMap p = read_pfm_rgb(e.pred_albedo);
    const AlbedoMap r = read_pfm_rgb(e.ref_albedo);
    const Mask mask = read_mask_any(e.mask, r.width(), r.height());
    m.albedo = albedo_error(p, r, mask);
    if (!a.image.empty() && !a.pred.empty() && fs::exists(fs::path(a.pred) / "shadow.pfm") &&
        !e.pred_normals.empty() && !e.pred_lighting.empty()) {
      const ImageRGB rec =
          render(p, read_pfm_gray((fs::path(a.pred) / "shadow.pfm").string()),
                 read_normals_pfm(e.pred_normals),
                 lighting_from_json(read_json(e.pred_lighting)), mask);
      m.reconstruction = reconstruction_error(rec.pixels, linearize(read_png(a.image)).pixels, mask);
    }
  }
  if (!e.pred_normals.empty() && !e.ref_normals.empty()) {
    m.normals = normal_error(read_normals_pfm(e.pred_normals), read_normals_pfm(e.ref_normals));
  }
  if (!e.pred_lighting.empty() && !e.ref_lighting.empty()) {
    const SHLighting p = lighting_from_json(read_json(e.pred_lighting));
    const SHLighting r = lighting_from_json(read_json(e.ref_lighting));
    m.lighting_global = lighting_error(p, r, LightingScale::global);
    m.lighting_per_colour = lighting_error(p, r, LightingScale::per_colour);
  }
  const nlohmann::json j = m.to_json();
  if (j.empty()) throw Error("evaluate: nothing to compare (give --pred and --ref)");
  print(j);
}

struct MakeSyntheticArgs {
  std::string out, prior, env_out;
  SyntheticConfig config;
  std::vector<double> tint;
  int env_maps = 0;
};

void cmd_make_synthetic(const MakeSyntheticArgs& a) {
  SyntheticConfig c = a.config;
  if (!a.tint.empty()) {
    if (a.tint.size() != 3) throw Error("make-synthetic: --tint takes three values");
    c.second_view_tint = Vec3(a.tint[0], a.tint[1], a.tint[2]);
  }
  const auto prior = load_prior(a.prior);
  const SyntheticScene scene = make_synthetic(c, *prior);
  const fs::path out(a.out);
  nlohmann::json views = nlohmann::json::array();
  for (std::size_t k = 0; k < scene.views.size(); ++k) {
    const std::string name = "view" + std::to_string(k);
    write_view_dir(out / name, scene.views[k]);
    views.push_back(name);
  }
  const auto& coeffs = scene.light_coeffs;
  write_json((out / "scene.json").string(),
             {{"seed", c.seed},
              {"width", c.width},
              {"height", c.height},
              {"guide_noise_deg", scene.guide_noise_deg},
              {"light_coeffs", std::vector<double>(coeffs.data(), coeffs.data() + coeffs.size())},
              {"views", views}});
  nlohmann::json summary{{"out", a.out}, {"views", views}};
  if (a.env_maps > 0) {
    const fs::path env_dir = a.env_out.empty() ? out / "envmaps" : fs::path(a.env_out);
    fs::create_directories(env_dir);
    const auto envs = default_env_maps(a.env_maps);
    for (std::size_t k = 0; k < envs.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "env_%03zu.pfm", k);
      write_pfm((env_dir / name).string(), envs[k].radiance);
    }
    summary["env_maps"] = envs.size();
    summary["env_dir"] = env_dir.string();
  }
  print(summary);
}

void fail(const std::string& command, const std::string& message) {
  std::cerr << nlohmann::json{{"error", message}, {"command", command}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outdoor inverse rendering with SH lighting and an illumination prior"};
  app.require_subcommand(1);

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Render an image from albedo, shadow, normals and lighting");
  render_cmd->add_option("--scene", render_args.scene, "Scene view directory with ground-truth maps");
  render_cmd->add_option("--albedo", render_args.albedo, "Albedo PFM");
  render_cmd->add_option("--shadow", render_args.shadow, "Shadow PFM (default: ones)");
  render_cmd->add_option("--normals", render_args.normals, "Normal PFM");
  render_cmd->add_option("--lighting", render_args.lighting, "Lighting JSON");
  render_cmd->add_option("--mask", render_args.mask, "Mask PNG");
  render_cmd->add_option("--out", render_args.out, "Output PNG")->required();
  render_cmd->add_option("--out-pfm", render_args.out_pfm, "Linear PFM output");

  SolveLightArgs sl;
  auto* sl_cmd = app.add_subcommand("solve-light", "Least-squares SH lighting");
  sl_cmd->add_option("--image", sl.image, "Observed PNG (or linear PFM)")->required();
  sl_cmd->add_option("--albedo", sl.albedo, "Albedo PFM")->required();
  sl_cmd->add_option("--shadow", sl.shadow, "Shadow PFM");
  sl_cmd->add_option("--normals", sl.normals, "Normal PFM")->required();
  sl_cmd->add_option("--mask", sl.mask, "Mask PNG");
  sl_cmd->add_flag("--in-prior", sl.in_prior, "Solve in the prior subspace");
  sl_cmd->add_option("--prior", sl.prior, "Prior JSON (default: built-in)");
  sl_cmd->add_option("--out", sl.out, "Lighting JSON output")->required();

  InvrenderArgs ir;
  auto* ir_cmd = app.add_subcommand("invrender", "Two-stage inverse rendering of one view or a pair");
  ir_cmd->add_option("--view", ir.view, "View record JSON")->required();
  ir_cmd->add_option("--pair", ir.pair, "Second view record JSON for a joint solve");
  ir_cmd->add_option("--out", ir.out, "Output directory")->required();
  ir_cmd->add_option("--config", ir.config, "Solve config JSON or 'default'");
  ir_cmd->add_option("--prior", ir.prior, "Prior JSON (default: built-in)");
  ir_cmd->add_option("--ground-plane", ir.ground_plane, "Ground plane JSON for guide inpainting");
  ir_cmd->add_option("--transforms", ir.transforms, "Feature transforms: lab, pyramid-grad, file:<pfm>");
  ir_cmd->add_option("--stage1-iters", ir.stage1, "Override stage 1 iterations");
  ir_cmd->add_option("--stage2-iters", ir.stage2, "Override stage 2 iterations");
  ir_cmd->add_option("--w-albedo", ir.w_albedo, "Albedo consistency weight");
  ir_cmd->add_option("--w-cross", ir.w_cross, "Cross-rendering weight");
  ir_cmd->add_flag("--deterministic", ir.deterministic, "Serial kernels, reproducible output");

  BuildPriorArgs bp;
  auto* bp_cmd = app.add_subcommand("build-prior", "PCA illumination prior from environment maps");
  bp_cmd->add_option("--envs", bp.envs, "Directory of equirectangular PFM maps");
  bp_cmd->add_option("--synthetic", bp.synthetic, "Add this many procedural skies");
  bp_cmd->add_option("--dim", bp.dim, "Prior dimension");
  bp_cmd->add_option("--out", bp.out, "Prior JSON output")->required();

  CrossProjectArgs cp;
  auto* cp_cmd = app.add_subcommand("cross-project", "Resample a source image onto a target view");
  cp_cmd->add_option("--src", cp.src, "Source PNG or PFM")->required();
  cp_cmd->add_option("--src-mask", cp.src_mask, "Source validity PNG");
  cp_cmd->add_option("--src-camera", cp.src_camera, "Source camera JSON")->required();
  cp_cmd->add_option("--tgt-depth", cp.tgt_depth, "Target depth PFM")->required();
  cp_cmd->add_option("--tgt-camera", cp.tgt_camera, "Target camera JSON")->required();
  cp_cmd->add_option("--out", cp.out, "Linear PFM output")->required();
  cp_cmd->add_option("--out-mask", cp.out_mask, "Validity PNG output");

  PairSelectArgs ps;
  auto* ps_cmd = app.add_subcommand("pair-select", "Select overlapping view pairs");
  ps_cmd->add_option("--records", ps.records, "View records JSON")->required();
  ps_cmd->add_option("--out", ps.out, "Pairs JSON output");
  ps_cmd->add_option("--camera-factor", ps.th.camera_factor, "Camera gate, x median distance");
  ps_cmd->add_option("--centroid-factor", ps.th.centroid_factor, "Centroid gate, x diameter/4");
  ps_cmd->add_option("--max-camera-distance", ps.max_camera_distance, "Absolute camera gate");
  ps_cmd->add_option("--r-max", ps.th.r_max, "Histogram correlation limit");
  ps_cmd->add_option("--bins", ps.th.bins, "Histogram bins");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Albedo, normal and lighting metrics");
  ev_cmd->add_option("--pred", ev.pred, "Prediction directory");
  ev_cmd->add_option("--ref", ev.ref, "Reference scene view directory");
  ev_cmd->add_option("--mask", ev.mask, "Mask PNG");
  ev_cmd->add_option("--image", ev.image, "Observed PNG for the reconstruction error");
  ev_cmd->add_option("--pred-albedo", ev.pred_albedo);
  ev_cmd->add_option("--ref-albedo", ev.ref_albedo);
  ev_cmd->add_option("--pred-normals", ev.pred_normals);
  ev_cmd->add_option("--ref-normals", ev.ref_normals);
  ev_cmd->add_option("--pred-lighting", ev.pred_lighting);
  ev_cmd->add_option("--ref-lighting", ev.ref_lighting);

  MakeSyntheticArgs ms;
  auto* ms_cmd = app.add_subcommand("make-synthetic", "Generate a synthetic scene with ground truth");
  ms_cmd->add_option("--out", ms.out, "Output directory")->required();
  ms_cmd->add_option("--seed", ms.config.seed, "Scene seed");
  ms_cmd->add_option("--width", ms.config.width, "Image width");
  ms_cmd->add_option("--height", ms.config.height, "Image height");
  ms_cmd->add_option("--views", ms.config.views, "1 or 2");
  ms_cmd->add_option("--noise-deg", ms.config.guide_noise_deg, "Guide normal noise (degrees)");
  ms_cmd->add_option("--terrain", ms.config.terrain_amplitude, "Terrain undulation amplitude");
  ms_cmd->add_option("--boxes", ms.config.box_count, "Number of boxes");
  ms_cmd->add_option("--tint", ms.tint, "Second-view illumination gain r g b")->expected(3);
  ms_cmd->add_option("--prior", ms.prior, "Prior JSON (default: built-in)");
  ms_cmd->add_option("--env-maps", ms.env_maps, "Also write this many procedural skies");
  ms_cmd->add_option("--env-out", ms.env_out, "Directory for the skies");

  std::string command = "invrender";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(command, e.what());
    return 2;
  }
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  try {
    if (*render_cmd) cmd_render(render_args);
    else if (*sl_cmd) cmd_solve_light(sl);
    else if (*ir_cmd) cmd_invrender(ir);
    else if (*bp_cmd) cmd_build_prior(bp);
    else if (*cp_cmd) cmd_cross_project(cp);
    else if (*ps_cmd) cmd_pair_select(ps);
    else if (*ev_cmd) cmd_evaluate(ev);
    else if (*ms_cmd) cmd_make_synthetic(ms);
  } catch (const std::exception& e) {
    fail(command, e.what());
    return 1;
  }
  return 0;
}
