#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dvp {

// Every tunable of the pipeline. Field names double as the keys of the flat
// `key = value` config file; see Config::keys().
struct Config {
  // Matching cost.
  int patch_size = 11;
  int patch_step = 5;
  int subpatch_size = 11;
  int subpatch_step = 2;
  double lambda = 0.25;
  double sigma_color = 0.1;
  double sigma_spatial = 0.0;  // 0 → size·step/3 of the patch in use
  double max_dropped_fraction = 0.5;

  // Depth-normal-edge aligned prior.
  int eta = 300;
  double phi_plane = 0.5;
  double phi_normal = 0.4;
  double gamma = 1.2;
  double kappa = 0.7;
  double delta = 0.8;
  double eps_grad = 0.005;
  double roberts_threshold = 0.0;  // 0 → Otsu
  int ransac_iterations = 256;
  double ransac_threshold_rel = 0.01;
  int erosion_passes = 5;
  int atlas_rounds = 3;
  int normal_search_radius = 3;
  int dilation_reach = 2;

  // Anchor search.
  int num_sectors = 8;
  int candidates_per_sector = 4;
  int anchor_radius = 64;

  // View selection and visibility restoration.
  double vs_sigma = 0.3;
  double vs_tau_good = 0.8;
  double vs_tau_bad = 1.2;
  double w_min = 0.1;
  double eps_reproj = 2.0;
  int reproj_window = 11;

  // PatchMatch loop.
  double tau_rel = 0.3;
  int passes = 3;
  int sweeps_per_pass = 2;
  int refine_samples = 6;
  int normal_tries = 32;
  double normal_perturbation_deg = 20.0;
  double alpha = 1.0;
  double beta = 4.0;
  int mu = 3;
  std::string interval_mode = "prose";  // prose | formula | fixed
  double fixed_interval_rel = 0.01;
  double fallback_perturbation = 0.05;
  bool multiscale = true;
  int coarse_sweeps = 2;
  double mono_seed_fraction = 0.5;
  double depth_min = 0.0;  // 0 → derived from the scene
  double depth_max = 0.0;

  // Feature switches (ablations).
  bool use_atlas = true;
  bool use_deformation = true;
  bool use_area_max = true;
  bool use_visibility_restoration = true;
  bool use_hemisphere = true;
  bool use_highlight = true;
  bool anchor_injection = true;

  // Fusion.
  int fuse_min_consistent = 2;
  double fuse_reproj_px = 2.0;
  double fuse_rel_depth = 0.01;
  double fuse_normal_deg = 10.0;
  double fuse_max_cost = 1.5;
  bool fuse_skip_highlight = true;

  // Execution.
  std::int64_t seed = 0;
  int threads = 0;  // 0 → hardware concurrency

  // Sets one key from its textual value. Throws ValidationError for unknown
  // keys (listing the valid ones) and for unparsable values.
  void set(std::string_view key, std::string_view value);

  // Applies `key=value`.
  void apply_assignment(std::string_view assignment);

  // Reads a flat `key = value` file; '#' starts a comment.
  void load_file(const std::filesystem::path& path);

  std::string get(std::string_view key) const;

  // `key = value` lines for every key, in declaration order.
  std::string dump() const;

  // Throws ValidationError on out-of-range values.
  void validate() const;

  static std::vector<std::string> keys();
};

// Worker count after resolving 0 and the DVP_THREADS environment variable.
int resolved_threads(const Config& config);

}  // namespace dvp
