#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/classifier.hpp"
#include "vfss/localizer.hpp"
#include "vfss/preprocess.hpp"

namespace vfss {

namespace fs = std::filesystem;

/// Where a resolved setting came from, in increasing precedence.
enum class SettingSource : std::uint8_t { defaults, file, env, cli };
std::string_view to_string(SettingSource s);

/// Flat key=value pipeline configuration. Keys are lowercase with
/// underscores; the environment override for key `k` is VFSS_<K>.
class Settings {
 public:
  /// All known keys with their defaults.
  static Settings defaults();

  /// Reads `key = value` lines; '#' starts a comment. Unknown keys are errors.
  void apply_file(const fs::path& path);
  /// Applies every VFSS_<KEY> variable present in the environment.
  void apply_env();
  void apply_env(const std::map<std::string, std::string>& env);
  void set(std::string_view key, std::string value, SettingSource source);

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  SettingSource source(std::string_view key) const;
  int get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  /// Sorted `key=value  # source` lines.
  std::string snapshot() const;

  ClaheParams clahe() const;
  CnnSpec cnn_spec() const;
  TrainConfig train_config() const;
  RefineConfig refine_config() const;
  std::array<double, 3> split_ratios() const;
  std::vector<double> iou_thresholds() const;

 private:
  struct Entry {
    std::string value;
    SettingSource source = SettingSource::defaults;
  };
  const Entry& entry(std::string_view key) const;
  std::map<std::string, Entry, std::less<>> values_;
};

/// Resolution order: defaults, then `config_file` (if non-empty), then the
/// environment, then `cli` overrides.
Settings resolve_settings(const fs::path& config_file, const std::map<std::string, std::string>& cli);

}  // namespace vfss
