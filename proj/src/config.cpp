#include "dvpmvs/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <variant>

#include "dvpmvs/types.hpp"

namespace dvp {
namespace {

using Field = std::variant<int Config::*, double Config::*, bool Config::*,
                           std::string Config::*, std::int64_t Config::*>;

struct KeyInfo {
  const char* name;
  Field field;
};

#define DVP_KEY(name) KeyInfo{#name, &Config::name}

const std::vector<KeyInfo>& key_table() {
  static const std::vector<KeyInfo> table = {
      DVP_KEY(patch_size),
      DVP_KEY(patch_step),
      DVP_KEY(subpatch_size),
      DVP_KEY(subpatch_step),
      DVP_KEY(lambda),
      DVP_KEY(sigma_color),
      DVP_KEY(sigma_spatial),
      DVP_KEY(max_dropped_fraction),
      DVP_KEY(eta),
      DVP_KEY(phi_plane),
      DVP_KEY(phi_normal),
      DVP_KEY(gamma),
      DVP_KEY(kappa),
      DVP_KEY(delta),
      DVP_KEY(eps_grad),
      DVP_KEY(roberts_threshold),
      DVP_KEY(ransac_iterations),
      DVP_KEY(ransac_threshold_rel),
      DVP_KEY(erosion_passes),
      DVP_KEY(atlas_rounds),
      DVP_KEY(normal_search_radius),
      DVP_KEY(dilation_reach),
      DVP_KEY(num_sectors),
      DVP_KEY(candidates_per_sector),
      DVP_KEY(anchor_radius),
      DVP_KEY(vs_sigma),
      DVP_KEY(vs_tau_good),
      DVP_KEY(vs_tau_bad),
      DVP_KEY(w_min),
      DVP_KEY(eps_reproj),
      DVP_KEY(reproj_window),
      DVP_KEY(tau_rel),
      DVP_KEY(passes),
      DVP_KEY(sweeps_per_pass),
      DVP_KEY(refine_samples),
      DVP_KEY(normal_tries),
      DVP_KEY(normal_perturbation_deg),
      DVP_KEY(alpha),
      DVP_KEY(beta),
      DVP_KEY(mu),
      DVP_KEY(interval_mode),
      DVP_KEY(fixed_interval_rel),
      DVP_KEY(fallback_perturbation),
      DVP_KEY(multiscale),
      DVP_KEY(coarse_sweeps),
      DVP_KEY(mono_seed_fraction),
      DVP_KEY(depth_min),
      DVP_KEY(depth_max),
      DVP_KEY(use_atlas),
      DVP_KEY(use_deformation),
      DVP_KEY(use_area_max),
      DVP_KEY(use_visibility_restoration),
      DVP_KEY(use_hemisphere),
      DVP_KEY(use_highlight),
      DVP_KEY(anchor_injection),
      DVP_KEY(fuse_min_consistent),
      DVP_KEY(fuse_reproj_px),
      DVP_KEY(fuse_rel_depth),
      DVP_KEY(fuse_normal_deg),
      DVP_KEY(fuse_max_cost),
      DVP_KEY(fuse_skip_highlight),
      DVP_KEY(seed),
      DVP_KEY(threads),
  };
  return table;
}

#undef DVP_KEY

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string valid_keys_message() {
  std::string msg = "valid keys:";
  for (const auto& k : key_table()) {
    msg += ' ';
    msg += k.name;
  }
  return msg;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("config: cannot parse value '" + std::string(text) +
                          "' for key '" + std::string(key) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") {
    return true;
  }
  if (text == "0" || text == "false" || text == "off" || text == "no") {
    return false;
  }
  throw ValidationError("config: cannot parse boolean '" + std::string(text) +
                        "' for key '" + std::string(key) + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& info : key_table()) {
    if (key != info.name) continue;
    std::visit(
        [&](auto member) {
          using M = std::remove_reference_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<M, bool>) {
            this->*member = parse_bool(key, value);
          } else if constexpr (std::is_same_v<M, std::string>) {
            this->*member = std::string(value);
          } else {
            this->*member = parse_number<M>(key, value);
          }
        },
        info.field);
    return;
  }
  throw ValidationError("config: unknown key '" + std::string(key) + "'; " +
                        valid_keys_message());
}

void Config::apply_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError("config: expected key=value, got '" +
                          std::string(assignment) + "'");
  }
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    try {
      apply_assignment(view);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
}

std::string Config::get(std::string_view key) const {
  for (const auto& info : key_table()) {
    if (key != info.name) continue;
    return std::visit(
        [&](auto member) -> std::string {
          using M = std::remove_cvref_t<decltype(this->*member)>;
          const auto& v = this->*member;
          if constexpr (std::is_same_v<M, bool>) {
            return v ? "true" : "false";
          } else if constexpr (std::is_same_v<M, std::string>) {
            return v;
          } else if constexpr (std::is_same_v<M, double>) {
            return format_double(v);
          } else {
            return std::to_string(v);
          }
        },
        info.field);
  }
  throw ValidationError("config: unknown key '" + std::string(key) + "'; " +
                        valid_keys_message());
}

std::string Config::dump() const {
  std::string out;
  for (const auto& info : key_table()) {
    out += info.name;
    out += " = ";
    out += get(info.name);
    out += '\n';
  }
  return out;
}

std::vector<std::string> Config::keys() {
  std::vector<std::string> out;
  for (const auto& info : key_table()) out.emplace_back(info.name);
  return out;
}

void Config::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("config: ") + what);
  };
  require(patch_size > 0 && patch_size % 2 == 1, "patch_size must be odd");
  require(subpatch_size > 0 && subpatch_size % 2 == 1,
          "subpatch_size must be odd");
  require(patch_step > 0 && subpatch_step > 0, "patch steps must be positive");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
  require(sigma_color > 0.0, "sigma_color must be positive");
  require(max_dropped_fraction >= 0.0 && max_dropped_fraction <= 1.0,
          "max_dropped_fraction must be in [0,1]");
  require(eta >= 3, "eta must be at least 3");
  require(ransac_iterations > 0, "ransac_iterations must be positive");
  require(num_sectors >= 3, "num_sectors must be at least 3");
  require(candidates_per_sector >= 1, "candidates_per_sector must be >= 1");
  require(anchor_radius >= 1, "anchor_radius must be >= 1");
  require(vs_sigma > 0.0, "vs_sigma must be positive");
  require(vs_tau_bad > vs_tau_good, "vs_tau_bad must exceed vs_tau_good");
  require(w_min > 0.0 && w_min <= 1.0, "w_min must be in (0,1]");
  require(reproj_window >= 1 && reproj_window % 2 == 1,
          "reproj_window must be odd");
  require(passes >= 1, "passes must be >= 1");
  require(sweeps_per_pass >= 1, "sweeps_per_pass must be >= 1");
  require(mu >= 1, "mu must be >= 1");
  require(alpha > 0.0 && beta > 0.0, "alpha and beta must be positive");
  require(interval_mode == "prose" || interval_mode == "formula" ||
              interval_mode == "fixed",
          "interval_mode must be prose, formula or fixed");
  require(depth_min >= 0.0 && depth_max >= 0.0, "depth range must be >= 0");
  require(depth_max == 0.0 || depth_max > depth_min,
          "depth_max must exceed depth_min");
  require(fuse_min_consistent >= 1, "fuse_min_consistent must be >= 1");
  require(threads >= 0, "threads must be >= 0");
}

int resolved_threads(const Config& config) {
  if (config.threads > 0) return config.threads;
  if (const char* env = std::getenv("DVP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace dvp
