#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/data.hpp"
#include "vfss/geometry.hpp"
#include "vfss/image.hpp"
#include "vfss/localizer.hpp"

namespace vfss {

namespace fs = std::filesystem;

enum class Difficulty : std::uint8_t { standard, hard };
std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view s);

/// Axis-aligned rectangle [x0, x1] x [y0, y1] in crop pixel coordinates.
struct RectF {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Bolus center at a given frame; positions between keyframes are linearly
/// interpolated.
struct PathKey {
  int frame = 0;
  Point2 center;
};

struct Vertebra {
  /// Corners in crop coordinates: anterior-superior, posterior-superior,
  /// posterior-inferior, anterior-inferior.
  std::array<Point2, 4> corners;
};

struct Ellipse {
  Point2 center;
  double semi_x = 1.0;
  double semi_y = 1.0;
  double intensity = 0.2;
};

/// Complete description of one synthetic clip. All geometry is expressed in
/// the coordinates of the central 341x341 crop; the renderer places the crop
/// at the same offset as center_crop().
struct PhantomConfig {
  int rows = 480;
  int cols = 720;
  double fps = 30.0;
  int n_frames = 40;
  /// First and last frame whose bolus touches the pharynx ROI.
  int entry_frame = 12;
  int exit_frame = 26;

  double bolus_semi_x = 10.0;
  double bolus_semi_y = 18.0;
  double bolus_intensity = 0.15;
  std::vector<PathKey> path;

  double background_level = 0.65;
  /// Low-frequency texture: sum of cosines with these amplitudes, wave
  /// vectors (cycles per pixel) and phases.
  std::vector<std::array<double, 4>> texture;
  double noise_sigma = 0.02;

  SpineLandmarks spine;
  std::vector<Vertebra> vertebrae;
  double vertebra_intensity = 0.45;
  RectF roi;
  RectF airway;
  double airway_gain = 0.08;
  std::vector<Ellipse> distractors;

  std::uint64_t seed = 0;

  /// Checks frame counts, entry < exit < n_frames and that the bolus stays in
  /// the crop along the whole path.
  void validate() const;
  Point2 center_at(int frame) const;
};

/// Per-frame truth in crop coordinates.
struct PhantomTruth {
  Point2 center;    // analytic path point
  Point2 centroid;  // centroid of the rendered support
  PixelBox bbox;
};

struct PhantomClip {
  std::vector<Gray8> frames;
  ClipAnnotation annotation;  // bpm = entry, uesc = exit; masks for [entry, exit]
  std::vector<PhantomTruth> truth;
  std::vector<Mask> masks;  // rendered bolus support for every frame (crop)
};

/// Bolus support at `frame`: pixel centers inside the ellipse (crop size).
Mask render_bolus_mask(const PhantomConfig& config, int frame);
/// Whether a rendered support touches the ROI rectangle.
bool touches_roi(const Mask& mask, const RectF& roi);

/// Renders every frame. Throws DataError when the configuration is invalid
/// or the path does not touch the ROI exactly on [entry, exit].
PhantomClip generate_clip(const PhantomConfig& config);

/// Per-subject anatomy and background, shared by all of that subject's clips.
struct PhantomSubject {
  std::string subject_id;
  SpineLandmarks spine;
  std::vector<Vertebra> vertebrae;
  RectF roi;
  RectF airway;
  double background_level = 0.65;
  std::vector<std::array<double, 4>> texture;
  std::vector<Ellipse> distractors;
};

PhantomSubject make_subject(int index, Difficulty difficulty, std::uint64_t seed);

/// Randomized clip for a subject: oral hold, fast transit through the ROI
/// and an esophageal tail. Consistency sets transit length (slower for
/// thicker boluses) and elongation (thin boluses are more elongated).
PhantomConfig make_clip_config(const PhantomSubject& subject, Consistency consistency, Difficulty difficulty,
                               std::uint64_t seed);

struct PhantomDatasetOptions {
  int n_subjects = 40;
  int clips_per_subject = 2;
  Difficulty difficulty = Difficulty::standard;
  std::uint64_t seed = 0;
};

struct PhantomDatasetPaths {
  fs::path manifest;
  fs::path annotations;
  fs::path landmarks;
  fs::path truth;
};

/// Writes the dataset under `out_dir`:
///   manifest.csv, annotations.csv (0-based, with two simulated raters),
///   landmarks.csv (clip-wide C2/C4 pairs), truth.csv
///   (clip_id,frame,cx,cy,x_min,y_min,x_max,y_max for every frame),
///   frames/<clip_id>/frame_NNNN.png and masks/<clip_id>/mask_NNNN.png for
///   frames in [bpm, uesc].
/// Consistencies cycle through all five levels across clips.
PhantomDatasetPaths generate_dataset(const fs::path& out_dir, const PhantomDatasetOptions& options);

/// Truth rows keyed by clip id, indexed by frame.
std::map<std::string, std::vector<PhantomTruth>> load_truth(const fs::path& path);

}  // namespace vfss
