#include "config_file.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "lumisplat/errors.hpp"

namespace lumisplat {

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DataError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const std::int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DataError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw DataError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

}  // namespace

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file " + path.string());

  TrainConfig& c = base;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"iterations", [&](auto& k, auto& v) { c.iterations = parse_int(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"init_gaussians", [&](auto& k, auto& v) { c.init_gaussians = static_cast<int>(parse_int(k, v)); }},
      {"scene_bound", [&](auto& k, auto& v) { c.scene_bound = parse_double(k, v); }},
      {"checkpoint_every", [&](auto& k, auto& v) { c.checkpoint_every = parse_int(k, v); }},
      {"lambda_dssim", [&](auto& k, auto& v) { c.loss.lambda_dssim = parse_double(k, v); }},
      {"omega_before", [&](auto& k, auto& v) { c.loss.omega_before = parse_double(k, v); }},
      {"omega_after", [&](auto& k, auto& v) { c.loss.omega_after = parse_double(k, v); }},
      {"omega_switch_iteration",
       [&](auto& k, auto& v) { c.loss.omega_switch_iteration = static_cast<int>(parse_int(k, v)); }},
      {"curve_weight", [&](auto& k, auto& v) { c.loss.curve_weight = parse_double(k, v); }},
      {"ssim_window", [&](auto& k, auto& v) { c.loss.ssim_window = static_cast<int>(parse_int(k, v)); }},
      {"ssim_sigma", [&](auto& k, auto& v) { c.loss.ssim_sigma = parse_double(k, v); }},
      {"spa_region", [&](auto& k, auto& v) { c.loss.spa_region = static_cast<int>(parse_int(k, v)); }},
      {"spa_lum_floor", [&](auto& k, auto& v) { c.loss.spa_lum_floor = parse_double(k, v); }},
      {"refine_interval", [&](auto& k, auto& v) { c.refine.interval = static_cast<int>(parse_int(k, v)); }},
      {"refine_stop_iteration",
       [&](auto& k, auto& v) { c.refine.stop_iteration = static_cast<int>(parse_int(k, v)); }},
      {"prune_opacity", [&](auto& k, auto& v) { c.refine.prune_opacity = parse_double(k, v); }},
      {"clone_top_fraction",
       [&](auto& k, auto& v) { c.refine.clone_top_fraction = parse_double(k, v); }},
      {"max_gaussians", [&](auto& k, auto& v) { c.refine.max_gaussians = static_cast<int>(parse_int(k, v)); }},
      {"refine_enabled", [&](auto& k, auto& v) { c.refine.enabled = parse_bool(k, v); }},
      {"prior_mode",
       [&](auto& k, auto& v) {
         if (v == "product") c.prior_mode = PriorMode::kProduct;
         else if (v == "compose") c.prior_mode = PriorMode::kCompose;
         else throw DataError("config: key '" + k + "' expects product|compose, got '" + v + "'");
       }},
      {"lr_position", [&](auto& k, auto& v) { c.lr_position = parse_double(k, v); }},
      {"lr_scale", [&](auto& k, auto& v) { c.lr_scale = parse_double(k, v); }},
      {"lr_rotation", [&](auto& k, auto& v) { c.lr_rotation = parse_double(k, v); }},
      {"lr_opacity", [&](auto& k, auto& v) { c.lr_opacity = parse_double(k, v); }},
      {"lr_color", [&](auto& k, auto& v) { c.lr_color = parse_double(k, v); }},
      {"lr_ab", [&](auto& k, auto& v) { c.lr_ab = parse_double(k, v); }},
      {"lr_matrix", [&](auto& k, auto& v) { c.lr_matrix = parse_double(k, v); }},
      {"wd_matrix", [&](auto& k, auto& v) { c.wd_matrix = parse_double(k, v); }},
      {"lr_curve", [&](auto& k, auto& v) { c.lr_curve = parse_double(k, v); }},
      {"wd_curve", [&](auto& k, auto& v) { c.wd_curve = parse_double(k, v); }},
      {"lr_generator", [&](auto& k, auto& v) { c.lr_generator = parse_double(k, v); }},
      {"wd_generator", [&](auto& k, auto& v) { c.wd_generator = parse_double(k, v); }},
      {"enable_tone_pipeline",
       [&](auto& k, auto& v) { c.enable_tone_pipeline = parse_bool(k, v); }},
      {"enable_global_curve",
       [&](auto& k, auto& v) { c.enable_global_curve = parse_bool(k, v); }},
      {"enable_curve_bias", [&](auto& k, auto& v) { c.enable_curve_bias = parse_bool(k, v); }},
      {"enable_matrices", [&](auto& k, auto& v) { c.enable_matrices = parse_bool(k, v); }},
      {"background_r", [&](auto& k, auto& v) { c.background[0] = parse_double(k, v); }},
      {"background_g", [&](auto& k, auto& v) { c.background[1] = parse_double(k, v); }},
      {"background_b", [&](auto& k, auto& v) { c.background[2] = parse_double(k, v); }},
  };

  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config: line " + std::to_string(line_no) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw DataError("config: unknown key '" + key + "' on line " + std::to_string(line_no));
    it->second(key, value);
  }
  return base;
}

}  // namespace lumisplat
