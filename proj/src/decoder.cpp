#include "vfss/decoder.hpp"

#include "vfss/error.hpp"

namespace vfss {

PhaseDetection decode(const PhaseSequence& sequence) {
  if (sequence.empty()) throw DataError("cannot decode an empty sequence");
  const int n = static_cast<int>(sequence.size());
  PhaseDetection out;

  // Single pass tracking the current P-run. A run of length >= 4 starting at
  // s and ending at e yields BPM candidate s and UESC candidate e.
  int run_start = -1;
  for (int i = 0; i <= n; ++i) {
    const bool p = i < n && sequence[i] == Phase::P;
    if (p && run_start < 0) run_start = i;
    if (!p && run_start >= 0) {
      if (i - run_start >= kBoundaryRun) {
        if (!out.bpm) out.bpm = run_start;
        out.uesc = i - 1;
      }
      run_start = -1;
    }
  }
  return out;
}

}  // namespace vfss
