#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvpmvs/config.hpp"
#include "dvpmvs/fusion.hpp"
#include "dvpmvs/scene_io.hpp"
#include "dvpmvs/solver.hpp"
#include "dvpmvs/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dvp;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  std::optional<std::int64_t> seed;
  std::optional<int> threads;
  bool dump_config = false;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_file, "key = value config file");
  app->add_option("--set", o.assignments, "Override one key (key=value), repeatable");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--threads", o.threads, "Worker threads (default: DVP_THREADS or all cores)");
  app->add_flag("--dump-config", o.dump_config, "Print the effective config and exit");
  app->add_flag("-q,--quiet", o.quiet, "No progress lines");
}

Config effective_config(const CommonOptions& o) {
  Config c;
  if (!o.config_file.empty()) c.load_file(o.config_file);
  for (const auto& a : o.assignments) c.apply_assignment(a);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

SolveOptions solve_options(const CommonOptions& o) {
  SolveOptions s;
  if (!o.quiet) s.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return s;
}

std::vector<DepthNormalResult> load_results(const Scene& scene, const fs::path& dir) {
  std::vector<DepthNormalResult> results;
  for (const auto& v : scene.views) results.push_back(load_depth_normal(dir, v.camera.id));
  return results;
}

double median_relative_error(const Grid<float>& depth, const Grid<float>& gt) {
  std::vector<double> err;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 0.f) err.push_back(std::abs(depth[i] - gt[i]) / gt[i]);
  }
  if (err.empty()) return 0.0;
  auto mid = err.begin() + static_cast<std::ptrdiff_t>(err.size() / 2);
  std::nth_element(err.begin(), mid, err.end());
  return *mid;
}

nlohmann::ordered_json report_object(const EvalReport& r) {
  return nlohmann::ordered_json::parse(report_json(r));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prior-guided PatchMatch multi-view stereo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dvpmvs 1.0");

  CommonOptions common;

  auto* synth = app.add_subcommand("synth", "Render a synthetic fixture scene");
  std::string fixture_name, synth_out;
  synth->add_option("fixture", fixture_name, "Fixture name")->required();
  synth->add_option("out", synth_out, "Output scene directory")->required();
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--seed", synth_seed, "Texture/noise seed");
  std::optional<int> synth_threads;
  synth->add_option("--threads", synth_threads, "Worker threads");
  bool list_fixtures = false;
  synth->add_flag("--list", list_fixtures, "List fixture names and exit");
  synth->allow_extras(false);

  auto* solve = app.add_subcommand("solve", "Estimate depth/normal maps");
  std::string solve_scene_dir, solve_out;
  std::vector<int> solve_views;
  solve->add_option("scene", solve_scene_dir, "Scene directory")->required();
  solve->add_option("out", solve_out, "Output directory")->required();
  solve->add_option("--view", solve_views, "View id to write (repeatable; default all)");
  add_common(solve, common);

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse depth maps into a point cloud");
  std::string fuse_scene_dir, fuse_maps, fuse_out;
  bool fuse_ascii = false;
  fuse_cmd->add_option("scene", fuse_scene_dir, "Scene directory")->required();
  fuse_cmd->add_option("depthmaps", fuse_maps, "Directory written by solve")->required();
  fuse_cmd->add_option("out", fuse_out, "Output PLY")->required();
  fuse_cmd->add_flag("--ascii", fuse_ascii, "Write ASCII PLY");
  add_common(fuse_cmd, common);

  auto* eval = app.add_subcommand("evaluate", "Accuracy/completeness/F1 of a cloud");
  std::string eval_cloud, eval_gt, eval_json;
  double eval_tau = 0.0;
  std::optional<int> eval_threads;
  eval->add_option("cloud", eval_cloud, "Reconstructed PLY")->required();
  eval->add_option("gt", eval_gt, "Ground-truth PLY")->required();
  eval->add_option("--tau", eval_tau, "Distance threshold, world units")->required();
  eval->add_option("--json", eval_json, "Also write the report as JSON");
  eval->add_option("--threads", eval_threads, "Worker threads");

  auto* pipe = app.add_subcommand("pipeline", "solve, fuse and (with gt/) evaluate");
  std::string pipe_scene_dir, pipe_out;
  std::optional<double> pipe_tau;
  pipe->add_option("scene", pipe_scene_dir, "Scene directory")->required();
  pipe->add_option("out", pipe_out, "Output directory")->required();
  pipe->add_option("--tau", pipe_tau,
                   "Evaluation threshold (default 0.5% of the GT cloud diameter)");
  add_common(pipe, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) {
      if (list_fixtures) {
        for (const auto& n : fixture_names()) std::cout << n << '\n';
        return kOk;
      }
      SceneSpec spec = fixture(fixture_name);
      if (synth_seed) spec.seed = *synth_seed;
      Config threads_only;
      if (synth_threads) threads_only.threads = *synth_threads;
      const RenderedScene rendered = render(spec, resolved_threads(threads_only));
      save_rendered(rendered, synth_out);
      std::cout << "wrote " << spec.name << " (" << rendered.scene.views.size()
                << " views, " << rendered.gt.cloud.size() << " gt points) to "
                << synth_out << '\n';
      return kOk;
    }

    const Config config = effective_config(common);
    if (common.dump_config) {
      std::cout << config.dump();
      return kOk;
    }

    if (solve->parsed()) {
      const Scene scene = load_scene(solve_scene_dir);
      SolveOptions options = solve_options(common);
      options.views = solve_views;
      const auto results = solve_scene(scene, config, options);
      fs::create_directories(solve_out);
      std::vector<int> ids = solve_views;
      if (ids.empty()) {
        for (const auto& v : scene.views) ids.push_back(v.camera.id);
      }
      for (size_t k = 0; k < results.size(); ++k) save_depth_normal(results[k], solve_out, ids[k]);
      return kOk;
    }

    if (fuse_cmd->parsed()) {
      const Scene scene = load_scene(fuse_scene_dir);
      const auto results = load_results(scene, fuse_maps);
      const FusedCloud cloud = fuse(results, scene, FusionParams::from_config(config));
      save_point_cloud(cloud.to_cloud_points(), fuse_out,
                       fuse_ascii ? PlyFormat::kAscii : PlyFormat::kBinaryLittleEndian);
      std::cout << "fused " << cloud.points.size() << " points\n";
      return kOk;
    }

    if (eval->parsed()) {
      const auto cloud = positions(load_point_cloud(eval_cloud));
      const auto gt = positions(load_point_cloud(eval_gt));
      Config threads_only;
      if (eval_threads) threads_only.threads = *eval_threads;
      const EvalReport report = evaluate(cloud, gt, eval_tau, resolved_threads(threads_only));
      std::cout << format_report(report);
      if (!eval_json.empty()) write_text(eval_json, report_json(report));
      return kOk;
    }

    if (pipe->parsed()) {
      const fs::path out = pipe_out;
      const Scene scene = load_scene(pipe_scene_dir);
      const auto results = solve_scene(scene, config, solve_options(common));
      const fs::path maps = out / "depth";
      fs::create_directories(maps);
      for (size_t k = 0; k < results.size(); ++k) {
        save_depth_normal(results[k], maps, scene.views[k].camera.id);
      }
      const FusedCloud cloud = fuse(results, scene, FusionParams::from_config(config));
      save_point_cloud(cloud.to_cloud_points(), out / "cloud.ply");

      nlohmann::ordered_json report;
      report["schema"] = 1;
      report["scene"] = pipe_scene_dir;
      report["views"] = scene.views.size();
      report["points"] = cloud.points.size();
      const fs::path gt_cloud = fs::path(pipe_scene_dir) / "gt" / "cloud.ply";
      if (fs::exists(gt_cloud)) {
        const GroundTruth gt = load_ground_truth(pipe_scene_dir, scene);
        const auto gt_points = positions(gt.cloud);
        const double tau = pipe_tau ? *pipe_tau : 0.005 * bounding_diameter(gt_points);
        std::vector<Vec3> fused;
        for (const auto& p : cloud.points) fused.push_back(p.position);
        const EvalReport r = evaluate(fused, gt_points, tau, resolved_threads(config));
        std::cout << format_report(r);
        report["evaluation"] = report_object(r);
        auto& per_view = report["median_rel_depth_error"];
        per_view = nlohmann::ordered_json::array();
        for (size_t k = 0; k < results.size(); ++k) {
          per_view.push_back(median_relative_error(results[k].depth, gt.depth[k]));
        }
      } else if (pipe_tau) {
        throw ValidationError("--tau given but " + gt_cloud.string() + " is missing");
      }
      write_text(out / "report.json", report.dump(2));
      std::cout << "fused " << cloud.points.size() << " points; report in "
                << (out / "report.json").string() << '\n';
      return kOk;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
