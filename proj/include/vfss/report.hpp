#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfss/data.hpp"
#include "vfss/metrics.hpp"
#include "vfss/phantom.hpp"
#include "vfss/pipeline.hpp"

namespace vfss {

namespace fs = std::filesystem;

/// Bucket label for pooled rows.
inline constexpr std::string_view kAllBucket = "all";

// ---------------------------------------------------------------- phase

struct PhaseClipResult {
  std::string clip_id;
  Consistency consistency = Consistency::thin;
  int bpm = 0, uesc = 0;
  PhaseDetection predicted;
  Counts counts;
};

struct PhaseRow {
  std::string backbone;
  std::string consistency{kAllBucket};
  std::size_t n = 0;  // clips
  double f1 = 0.0;
  double p3_bpm = 0.0;
  double p3_uesc = 0.0;
};

struct PhaseEvaluation {
  std::vector<PhaseClipResult> clips;
  PhaseRow overall;
  std::vector<PhaseRow> by_consistency;  // all five levels, n = 0 rows kept
};

/// Frame F1 over pooled frame counts of all clips; P3 over clips.
PhaseEvaluation evaluate_phase(const std::string& backbone, const std::vector<ClipManifestEntry>& clips,
                               const std::map<std::string, ClipAnnotation>& annotations,
                               const std::map<std::string, PhaseSequence>& predicted_labels,
                               const std::map<std::string, PhaseDetection>& events, int tolerance);

/// phase_table.csv: backbone,f1,p3_bpm,p3_uesc
void write_phase_table(const fs::path& path, const std::vector<PhaseRow>& rows);
/// phase_by_consistency.csv: consistency,backbone,n,f1,p3_bpm,p3_uesc
void write_phase_by_consistency(const fs::path& path, const std::vector<PhaseRow>& rows);
/// phase_clips.csv: clip_id,consistency,bpm,uesc,pred_bpm,pred_uesc,tp,fp,fn
void write_phase_clips(const fs::path& path, const std::vector<PhaseClipResult>& clips);
std::vector<PhaseRow> read_phase_table(const fs::path& path);
std::vector<PhaseRow> read_phase_by_consistency(const fs::path& path);

// --------------------------------------------------------- localization

struct GroundTruthFrame {
  Point2 centroid;
  PixelBox bbox;
};

/// Ground truth per clip and frame from a truth CSV.
std::map<std::string, std::map<int, GroundTruthFrame>> truth_from_csv(const fs::path& path);
/// Ground truth from mask PNGs <dir>/<clip_id>/mask_NNNN.png.
std::map<int, GroundTruthFrame> truth_from_masks(const fs::path& dir, const std::string& clip_id);

struct LocalizationFrame {
  std::string clip_id;
  Consistency consistency = Consistency::thin;
  int frame = 0;
  bool detected = false;
  GroundTruthFrame truth;
  BolusRow predicted;
  double truth_y = 0.0;  // spine-frame vertical coordinate
  double pred_y = 0.0;
  double error = 0.0;  // centroid distance / C2-C4 distance
};

struct LocalizationRow {
  std::string backbone;
  std::string consistency{kAllBucket};
  std::size_t n = 0;           // evaluated frames
  std::size_t n_detected = 0;  // frames with a detection
  std::optional<double> r_y;
  std::optional<double> rmse_median, rmse_q1, rmse_q3;
};

struct LocalizationEvaluation {
  std::vector<LocalizationFrame> frames;
  LocalizationRow overall;
  std::vector<LocalizationRow> by_consistency;
  std::vector<SweepPoint> sweep;
};

/// Evaluates every frame in each clip's annotated [bpm, uesc] window. Frames
/// without a detection count as FN in the sweep and are excluded from r_y
/// and RMSE.
LocalizationEvaluation evaluate_localization(
    const std::string& backbone, const std::vector<ClipManifestEntry>& clips,
    const std::map<std::string, ClipAnnotation>& annotations, const LandmarkTable& landmarks,
    const std::map<std::string, std::map<int, GroundTruthFrame>>& truth,
    const std::map<std::string, std::vector<BolusRow>>& predictions, const std::vector<double>& thresholds);

/// localization_table.csv: backbone,r_y,rmse   (rmse as "median (q1-q3)")
void write_localization_table(const fs::path& path, const std::vector<LocalizationRow>& rows);
/// localization_by_consistency.csv: consistency,backbone,n,n_detected,r_y,rmse
void write_localization_by_consistency(const fs::path& path, const std::vector<LocalizationRow>& rows);
/// localization_frames.csv: clip_id,consistency,frame,detected,truth_y,pred_y,error
void write_localization_frames(const fs::path& path, const std::vector<LocalizationFrame>& frames);
/// f1_sweep.csv: backbone,threshold,f1
void write_sweep(const fs::path& path, const std::string& backbone, const std::vector<SweepPoint>& sweep);

struct SweepRow {
  std::string backbone;
  double threshold = 0.0;
  double f1 = 0.0;
};
std::vector<SweepRow> read_sweep(const fs::path& path);
std::vector<LocalizationRow> read_localization_table(const fs::path& path);
std::vector<LocalizationRow> read_localization_by_consistency(const fs::path& path);
std::vector<LocalizationFrame> read_localization_frames(const fs::path& path);

/// Friedman test on per-frame errors of frames detected by every backbone.
/// Returns nullopt with fewer than two backbones or two common frames.
std::optional<FriedmanResult> compare_backbones(const std::vector<std::string>& backbones,
                                                const std::vector<std::vector<LocalizationFrame>>& frames);

// ---------------------------------------------------------------- text

std::string phase_text_table(const std::vector<PhaseRow>& overall, const std::vector<PhaseRow>& by_consistency);
std::string localization_text_table(const std::vector<LocalizationRow>& overall,
                                    const std::vector<LocalizationRow>& by_consistency,
                                    const std::optional<FriedmanResult>& friedman,
                                    const std::vector<std::string>& backbones);

/// Inter-rater agreement on BPM and UESC frames across annotated clips.
struct InterraterReport {
  std::optional<Agreement> bpm, uesc;
  std::size_t n = 0;
};
InterraterReport interrater(const std::vector<ClipAnnotation>& annotations, int tolerance);

}  // namespace vfss
