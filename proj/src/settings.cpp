#include "vfss/settings.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vfss/error.hpp"
#include "vfss/io.hpp"
#include "vfss/metrics.hpp"

extern char** environ;

namespace vfss {

std::string_view to_string(SettingSource s) {
  switch (s) {
    case SettingSource::defaults: return "default";
    case SettingSource::file: return "config";
    case SettingSource::env: return "env";
    case SettingSource::cli: return "cli";
  }
  return "?";
}

Settings Settings::defaults() {
  const TrainConfig tc;
  const RefineConfig rc;
  const ClaheParams cp;
  Settings s;
  auto d = [&](const char* k, std::string v) { s.values_[k] = {std::move(v), SettingSource::defaults}; };
  auto num = [](double v) { return io::format_double(v); };
  d("seed", "0");
  d("workers", "1");
  d("arch", "cnn4");
  d("net_side", "224");
  d("epochs", std::to_string(tc.epochs));
  d("batch_size", std::to_string(tc.batch_size));
  d("learning_rate", num(tc.initial_lr));
  d("lr_decay_period", std::to_string(tc.lr_decay_period));
  d("lr_decay_factor", num(tc.lr_decay_factor));
  d("class_balance", "false");
  d("adam_beta1", num(tc.adam_beta1));
  d("adam_beta2", num(tc.adam_beta2));
  d("adam_epsilon", num(tc.adam_epsilon));
  d("clahe_clip_limit", num(cp.clip_limit));
  d("clahe_tiles", std::to_string(cp.tiles_x));
  d("threshold_frac", num(rc.threshold_frac));
  d("k_darkest", std::to_string(rc.k_darkest));
  d("gac_iterations", std::to_string(rc.gac_iterations));
  d("dilation_radius", std::to_string(rc.dilation_radius));
  d("gac_smooth_sigma", num(rc.gac_smooth_sigma));
  d("gac_edge_scale", num(rc.gac_edge_scale));
  d("gac_edge_exponent", num(rc.gac_edge_exponent));
  d("gac_balloon_threshold", num(rc.gac_balloon_threshold));
  d("gac_smoothing", std::to_string(rc.gac_smoothing));
  d("balloon", "expand");
  d("cam_min_positive_fraction", num(rc.min_positive_fraction));
  d("p3_tolerance", "3");
  d("sweep_lo", "0.25");
  d("sweep_hi", "0.75");
  d("sweep_step", "0.05");
  d("split_train", num(38.0 / 59.0));
  d("split_val", num(9.0 / 59.0));
  d("split_test", num(12.0 / 59.0));
  d("overlays", "true");
  return s;
}

const Settings::Entry& Settings::entry(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + std::string(key) + "'");
  return it->second;
}

void Settings::set(std::string_view key, std::string value, SettingSource source) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + std::string(key) + "'");
  it->second = {io::trim(value), source};
}

bool Settings::has(std::string_view key) const { return values_.find(key) != values_.end(); }
const std::string& Settings::get(std::string_view key) const { return entry(key).value; }
SettingSource Settings::source(std::string_view key) const { return entry(key).source; }

int Settings::get_int(std::string_view key) const { return io::parse_int(get(key), key); }

std::uint64_t Settings::get_u64(std::string_view key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used == v.size() && v.find('-') == std::string::npos) return x;
  } catch (const std::exception&) {
  }
  throw UsageError("setting " + std::string(key) + ": '" + v + "' is not a non-negative integer");
}

double Settings::get_double(std::string_view key) const { return io::parse_double(get(key), key); }

bool Settings::get_bool(std::string_view key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("setting " + std::string(key) + ": '" + v + "' is not a boolean");
}

void Settings::apply_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path.string());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (io::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    const std::string key = io::trim(line.substr(0, eq));
    if (!has(key)) throw DataError(path.string() + ":" + std::to_string(n) + ": unknown setting '" + key + "'");
    set(key, line.substr(eq + 1), SettingSource::file);
  }
}

void Settings::apply_env(const std::map<std::string, std::string>& env) {
  for (auto& [key, e] : values_) {
    std::string name = "VFSS_" + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const auto it = env.find(name); it != env.end()) e = {io::trim(it->second), SettingSource::env};
  }
}

void Settings::apply_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string_view kv(*e);
    if (kv.rfind("VFSS_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq != std::string_view::npos) env[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
  }
  apply_env(env);
}

std::string Settings::snapshot() const {
  std::ostringstream s;
  for (const auto& [k, e] : values_) s << k << '=' << e.value << "  # " << to_string(e.source) << '\n';
  return s.str();
}

ClaheParams Settings::clahe() const {
  ClaheParams p;
  p.clip_limit = get_double("clahe_clip_limit");
  p.tiles_x = p.tiles_y = get_int("clahe_tiles");
  if (!(p.clip_limit > 0) || p.tiles_x < 1) throw UsageError("CLAHE clip limit and tile count must be positive");
  return p;
}

CnnSpec Settings::cnn_spec() const {
  const std::string arch = get("arch");
  const int side = get_int("net_side");
  if (arch == "cnn3") return CnnSpec::cnn3(side);
  if (arch == "cnn4") return CnnSpec::cnn4(side);
  throw UsageError("arch '" + arch + "' cannot be trained here (expected cnn3 or cnn4)");
}

TrainConfig Settings::train_config() const {
  TrainConfig c;
  c.epochs = get_int("epochs");
  c.batch_size = get_int("batch_size");
  c.initial_lr = get_double("learning_rate");
  c.lr_decay_period = get_int("lr_decay_period");
  c.lr_decay_factor = get_double("lr_decay_factor");
  c.seed = get_u64("seed");
  c.class_balance = get_bool("class_balance");
  c.adam_beta1 = get_double("adam_beta1");
  c.adam_beta2 = get_double("adam_beta2");
  c.adam_epsilon = get_double("adam_epsilon");
  c.validate();
  return c;
}

RefineConfig Settings::refine_config() const {
  RefineConfig c;
  c.threshold_frac = get_double("threshold_frac");
  c.k_darkest = get_int("k_darkest");
  c.gac_iterations = get_int("gac_iterations");
  c.dilation_radius = get_int("dilation_radius");
  c.gac_smooth_sigma = get_double("gac_smooth_sigma");
  c.gac_edge_scale = get_double("gac_edge_scale");
  c.gac_edge_exponent = get_double("gac_edge_exponent");
  c.gac_balloon_threshold = get_double("gac_balloon_threshold");
  c.gac_smoothing = get_int("gac_smoothing");
  const std::string b = get("balloon");
  if (b == "expand") c.balloon = Balloon::expand;
  else if (b == "contract") c.balloon = Balloon::contract;
  else if (b == "off") c.balloon = Balloon::off;
  else throw UsageError("balloon must be expand, contract or off");
  c.min_positive_fraction = get_double("cam_min_positive_fraction");
  c.validate();
  return c;
}

std::array<double, 3> Settings::split_ratios() const {
  return {get_double("split_train"), get_double("split_val"), get_double("split_test")};
}

std::vector<double> Settings::iou_thresholds() const {
  return default_iou_thresholds(get_double("sweep_lo"), get_double("sweep_hi"), get_double("sweep_step"));
}

Settings resolve_settings(const fs::path& config_file, const std::map<std::string, std::string>& cli) {
  Settings s = Settings::defaults();
  if (!config_file.empty()) s.apply_file(config_file);
  s.apply_env();
  for (const auto& [k, v] : cli) s.set(k, v, SettingSource::cli);
  return s;
}

}  // namespace vfss
