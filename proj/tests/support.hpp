#pragma once

// Shared helpers for the test binaries: scratch directories and hand-rolled
// random generators for property tests.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vfss/data.hpp"
#include "vfss/image.hpp"

namespace vfss::test {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = fs::temp_directory_path() /
            ("vfss_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

  PhaseSequence phases(int n, double p_rate = 0.5) {
    PhaseSequence s(n);
    for (auto& v : s) v = coin(p_rate) ? Phase::P : Phase::N;
    return s;
  }

  ImageF image(int rows, int cols, float lo = 0.0f, float hi = 1.0f) {
    ImageF img(rows, cols);
    for (auto& v : img.pixels()) v = static_cast<float>(real(lo, hi));
    return img;
  }

  Mask mask(int rows, int cols, double density) {
    Mask m(rows, cols);
    for (auto& v : m.pixels()) v = coin(density) ? 1 : 0;
    return m;
  }

  Point2 point(double lo, double hi) { return {real(lo, hi), real(lo, hi)}; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Mask disk_mask(int rows, int cols, double cr, double cc, double radius) {
  Mask m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = (r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius ? 1 : 0;
  return m;
}

inline double mask_iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.pixels()[i] && b.pixels()[i];
    uni += a.pixels()[i] || b.pixels()[i];
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

}  // namespace vfss::test
