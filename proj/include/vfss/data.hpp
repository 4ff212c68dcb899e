#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/geometry.hpp"
#include "vfss/image.hpp"

namespace vfss {

namespace fs = std::filesystem;

/// IDDSI bolus consistency levels.
enum class Consistency : std::uint8_t { thin, slightly_thick, mildly_thick, moderately_thick, extremely_thick };

inline constexpr std::array<Consistency, 5> kAllConsistencies = {
    Consistency::thin, Consistency::slightly_thick, Consistency::mildly_thick, Consistency::moderately_thick,
    Consistency::extremely_thick};

std::string_view to_string(Consistency c);
Consistency parse_consistency(std::string_view s);

/// Frame class: pharyngeal (P) or non-pharyngeal (N).
enum class Phase : std::uint8_t { N = 0, P = 1 };
using PhaseSequence = std::vector<Phase>;

/// "NNPP..." rendering; parse_phases accepts the same alphabet only.
std::string to_string(const PhaseSequence& seq);
PhaseSequence parse_phases(std::string_view s);

struct ClipManifestEntry {
  std::string clip_id;
  std::string subject_id;
  Consistency consistency = Consistency::thin;
  fs::path path;  // resolved against the manifest's directory
  int n_frames = 0;
  double fps = 30.0;
};

struct ClipAnnotation {
  std::string clip_id;
  int bpm_frame = 0;
  int uesc_frame = 0;
  std::optional<int> rater_a_bpm, rater_a_uesc, rater_b_bpm, rater_b_uesc;
  std::map<int, Mask> bolus_masks;          // evaluation only
  std::map<int, SpineLandmarks> spine;      // per-frame landmarks
};

struct DatasetSplit {
  std::set<std::string> train_clips;
  std::set<std::string> val_clips;
  std::set<std::string> test_clips;
  std::uint64_t seed = 0;
};

enum class Subset : std::uint8_t { train, val, test };
std::string_view to_string(Subset s);
Subset parse_subset(std::string_view s);

/// Reads a manifest (header `clip_id,subject_id,consistency,path,n_frames,fps`).
/// Relative clip paths are resolved against the manifest directory. With
/// `check_frames`, the declared frame count is compared with the clip on disk.
std::vector<ClipManifestEntry> load_manifest(const fs::path& path, bool check_frames = true);
void save_manifest(const fs::path& path, const std::vector<ClipManifestEntry>& entries);

/// Reads an annotation file. The optional first-line directive
/// `#index_base=0|1` selects the indexing base of the file; indices are
/// returned 0-based.
std::vector<ClipAnnotation> load_annotations(const fs::path& path);
void save_annotations(const fs::path& path, const std::vector<ClipAnnotation>& annotations);

/// Checks every annotation against its manifest entry (known clip, index
/// ranges, bpm <= uesc).
void validate_annotations(const std::vector<ClipAnnotation>& annotations,
                          const std::vector<ClipManifestEntry>& manifest);

/// Landmark file `clip_id,frame,c2x,c2y,c4x,c4y`. An empty frame field marks
/// a clip-wide pair.
class LandmarkTable {
 public:
  static LandmarkTable load(const fs::path& path);
  void save(const fs::path& path) const;

  void set(const std::string& clip_id, std::optional<int> frame, SpineLandmarks lm);

  struct Lookup {
    SpineLandmarks landmarks;
    bool clip_wide_fallback = false;
  };
  /// Per-frame pair when present, else the clip-wide pair, else the nearest
  /// annotated frame of the clip (flagged as fallback).
  std::optional<Lookup> find(const std::string& clip_id, int frame) const;

 private:
  std::map<std::string, std::map<int, SpineLandmarks>> per_frame_;
  std::map<std::string, SpineLandmarks> clip_wide_;
};

/// Subject-wise split: shuffles the sorted subject list with a seeded PRNG and
/// slices it; val/test counts are rounded to nearest, the remainder goes to
/// training.
DatasetSplit subject_split(const std::vector<ClipManifestEntry>& entries, std::array<double, 3> ratios,
                           std::uint64_t seed);

void save_split(const fs::path& path, const DatasetSplit& split);
DatasetSplit load_split(const fs::path& path);

/// P for frames in [bpm, uesc], N elsewhere.
PhaseSequence label_frames(const ClipAnnotation& annotation, int n_frames);

}  // namespace vfss
