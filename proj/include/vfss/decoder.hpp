#pragma once

#include <optional>

#include "vfss/data.hpp"

namespace vfss {

struct PhaseDetection {
  std::optional<int> bpm;
  std::optional<int> uesc;
  bool operator==(const PhaseDetection&) const = default;
};

/// Minimum P-run that marks a boundary: the frame itself plus three
/// consecutive P frames after (BPM) or before (UESC) it.
inline constexpr int kBoundaryRun = 4;

/// BPM = first P frame followed by at least three consecutive P frames;
/// UESC = last P frame preceded by at least three consecutive P frames.
/// Both rules scan the whole clip independently, so the two boundaries may
/// come from different P-runs.
PhaseDetection decode(const PhaseSequence& sequence);

}  // namespace vfss
