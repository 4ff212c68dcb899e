#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfss/classifier.hpp"
#include "vfss/data.hpp"
#include "vfss/decoder.hpp"
#include "vfss/io.hpp"
#include "vfss/localizer.hpp"
#include "vfss/preprocess.hpp"

namespace vfss {

namespace fs = std::filesystem;

/// Runs fn(0..n-1) on `workers` threads. Indices are claimed in order; the
/// first exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct PreparedClip {
  std::vector<ImageF> frames;  // 341x341 preprocessed, empty unless requested
  std::vector<ImageF> net;     // net_side x net_side network inputs
};

PreparedClip prepare_clip(const fs::path& clip, const ClaheParams& clahe, int net_side, bool keep_frames);

/// Manifest entries of one subset, in manifest order.
std::vector<ClipManifestEntry> select_subset(const std::vector<ClipManifestEntry>& manifest,
                                             const DatasetSplit& split, Subset subset);

std::map<std::string, ClipAnnotation> index_annotations(const std::vector<ClipAnnotation>& annotations);

/// Every frame of every listed clip with its P/N label.
LabeledFrames gather_frames(const std::vector<ClipManifestEntry>& clips,
                            const std::map<std::string, ClipAnnotation>& annotations, const ClaheParams& clahe,
                            int net_side, int workers);

/// probs.csv: frame,prob_p,pred (pred is P or N)
void write_probs(const fs::path& path, const ClipPrediction& prediction);
ClipPrediction read_probs(const fs::path& path);

/// events.csv: clip_id,bpm,uesc (empty field = not detected)
struct EventRow {
  std::string clip_id;
  PhaseDetection detection;
};
void write_events(const fs::path& path, const std::vector<EventRow>& rows);
std::vector<EventRow> read_events(const fs::path& path);

/// bolus.csv: frame,cx,cy,x_min,y_min,x_max,y_max,detected
struct BolusRow {
  int frame = 0;
  bool detected = false;
  Point2 centroid;
  PixelBox bbox;
};
void write_bolus(const fs::path& path, const std::vector<BolusRow>& rows);
std::vector<BolusRow> read_bolus(const fs::path& path);

/// Frame with the predicted mask outline (yellow), centroid dot (red) and the
/// ground-truth outline (blue) when given.
io::RgbImage make_overlay(const ImageF& frame, const Mask* predicted, const Point2* centroid, const Mask* truth);

/// Grad-CAM for class P on one network input, upsampled to 341x341.
ImageF cam_for_frame(const PhaseClassifier& model, const ImageF& net_input);

struct LocalizeOptions {
  RefineConfig refine;
  /// Frames to process; empty means every frame.
  std::vector<int> frames;
  /// When set, mask_NNNN.png and overlay_NNNN.png are written here.
  std::optional<fs::path> image_dir;
  bool overlays = true;
  /// Ground-truth masks for overlays, keyed by frame.
  const std::map<int, Mask>* truth_masks = nullptr;
};

/// Classifies each requested frame; frames predicted N are reported as not
/// detected, frames predicted P go through Grad-CAM and localize().
std::vector<BolusRow> localize_clip(const PhaseClassifier& model, const PreparedClip& clip,
                                    const LocalizeOptions& options);

/// Mask PNG (nonzero = foreground) to a 0/1 mask.
Mask read_mask(const fs::path& path);

std::string format_frame_file(std::string_view prefix, int frame);

}  // namespace vfss
