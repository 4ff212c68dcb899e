#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/image.hpp"

namespace vfss::io {

namespace fs = std::filesystem;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};
using RgbImage = Image<Rgb>;

Gray8 read_gray(const fs::path& path);
void write_png(const fs::path& path, const Gray8& image);
void write_png(const fs::path& path, const RgbImage& image);

/// Numbered grayscale frame files in `dir`, ordered by the integer embedded
/// in the file stem (frame_2.png sorts before frame_10.png).
std::vector<fs::path> list_frame_files(const fs::path& dir);

/// Number of frames in a clip given as a frame directory or a video file.
int count_clip_frames(const fs::path& clip);

/// Decodes every frame of a clip to 8-bit grayscale.
std::vector<Gray8> load_clip(const fs::path& clip);

/// Minimal comma-separated table. Lines starting with '#' are directives and
/// are collected separately; blank lines are skipped.
struct CsvTable {
  std::vector<std::string> directives;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index of `name`, or -1.
  int column(std::string_view name) const;
  /// Column index of `name`; throws DataError if absent.
  int require_column(std::string_view name, const fs::path& source) const;
};

CsvTable read_csv(const fs::path& path);
std::vector<std::string> split_fields(std::string_view line, char sep = ',');
std::string trim(std::string_view s);

int parse_int(std::string_view s, std::string_view what);
double parse_double(std::string_view s, std::string_view what);

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double v);
/// Fixed-point with `digits` decimals.
std::string format_fixed(double v, int digits);

void ensure_directory(const fs::path& dir);

}  // namespace vfss::io
