#include "vfss/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vfss/error.hpp"
#include "vfss/io.hpp"
#include "vfss/random.hpp"

namespace vfss {

namespace {

constexpr std::array<std::string_view, 5> kConsistencyNames = {"thin", "slightly_thick", "mildly_thick",
                                                               "moderately_thick", "extremely_thick"};

std::optional<int> optional_index(const std::vector<std::string>& row, int col, int base, std::string_view what) {
  if (col < 0 || row[col].empty()) return std::nullopt;
  return io::parse_int(row[col], what) - base;
}

}  // namespace

std::string_view to_string(Consistency c) { return kConsistencyNames[static_cast<std::size_t>(c)]; }

Consistency parse_consistency(std::string_view s) {
  for (std::size_t i = 0; i < kConsistencyNames.size(); ++i)
    if (kConsistencyNames[i] == s) return static_cast<Consistency>(i);
  throw DataError("unknown consistency '" + std::string(s) + "'");
}

std::string to_string(const PhaseSequence& seq) {
  std::string s;
  s.reserve(seq.size());
  for (Phase p : seq) s.push_back(p == Phase::P ? 'P' : 'N');
  return s;
}

PhaseSequence parse_phases(std::string_view s) {
  PhaseSequence seq;
  seq.reserve(s.size());
  for (char c : s) {
    if (c == 'P') seq.push_back(Phase::P);
    else if (c == 'N') seq.push_back(Phase::N);
    else throw DataError("phase labels must be P or N, got '" + std::string(1, c) + "'");
  }
  return seq;
}

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::train: return "train";
    case Subset::val: return "val";
    case Subset::test: return "test";
  }
  return "?";
}

Subset parse_subset(std::string_view s) {
  if (s == "train") return Subset::train;
  if (s == "val") return Subset::val;
  if (s == "test") return Subset::test;
  throw DataError("unknown subset '" + std::string(s) + "'");
}

std::vector<ClipManifestEntry> load_manifest(const fs::path& path, bool check_frames) {
  if (!fs::exists(path)) throw DataError("manifest not found: " + path.string());
  const io::CsvTable t = io::read_csv(path);
  const int c_id = t.require_column("clip_id", path);
  const int c_subj = t.require_column("subject_id", path);
  const int c_cons = t.require_column("consistency", path);
  const int c_path = t.require_column("path", path);
  const int c_n = t.require_column("n_frames", path);
  const int c_fps = t.column("fps");

  std::vector<ClipManifestEntry> entries;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    ClipManifestEntry e;
    e.clip_id = row[c_id];
    if (e.clip_id.empty()) throw DataError(path.string() + ": empty clip_id");
    if (!seen.insert(e.clip_id).second) throw DataError(path.string() + ": duplicate clip_id '" + e.clip_id + "'");
    e.subject_id = row[c_subj];
    e.consistency = parse_consistency(row[c_cons]);
    e.path = fs::path(row[c_path]);
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    e.n_frames = io::parse_int(row[c_n], "n_frames");
    if (e.n_frames < 1) throw DataError(path.string() + ": clip '" + e.clip_id + "' has n_frames < 1");
    if (c_fps >= 0 && !row[c_fps].empty()) e.fps = io::parse_double(row[c_fps], "fps");
    if (!(e.fps > 0.0)) throw DataError(path.string() + ": clip '" + e.clip_id + "' has non-positive fps");
    if (check_frames) {
      const int on_disk = io::count_clip_frames(e.path);
      if (on_disk != e.n_frames)
        throw DataError(path.string() + ": clip '" + e.clip_id + "' declares n_frames=" + std::to_string(e.n_frames) +
                        " but " + std::to_string(on_disk) + " frames were found");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const fs::path& path, const std::vector<ClipManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "clip_id,subject_id,consistency,path,n_frames,fps\n";
  for (const auto& e : entries) {
    fs::path p = e.path;
    if (p.is_absolute()) p = fs::relative(p, path.parent_path());
    out << e.clip_id << ',' << e.subject_id << ',' << to_string(e.consistency) << ',' << p.generic_string() << ','
        << e.n_frames << ',' << io::format_double(e.fps) << '\n';
  }
}

std::vector<ClipAnnotation> load_annotations(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  int base = 0;
  for (const auto& d : t.directives) {
    if (d.rfind("#index_base=", 0) == 0) {
      base = io::parse_int(d.substr(12), "index_base");
      if (base != 0 && base != 1) throw DataError(path.string() + ": index_base must be 0 or 1");
    }
  }
  const int c_id = t.require_column("clip_id", path);
  const int c_bpm = t.require_column("bpm", path);
  const int c_uesc = t.require_column("uesc", path);
  const int c_ab = t.column("rater_a_bpm"), c_au = t.column("rater_a_uesc");
  const int c_bb = t.column("rater_b_bpm"), c_bu = t.column("rater_b_uesc");

  std::vector<ClipAnnotation> out;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    ClipAnnotation a;
    a.clip_id = row[c_id];
    if (!seen.insert(a.clip_id).second)
      throw DataError(path.string() + ": duplicate annotation for clip '" + a.clip_id + "'");
    a.bpm_frame = io::parse_int(row[c_bpm], "bpm") - base;
    a.uesc_frame = io::parse_int(row[c_uesc], "uesc") - base;
    a.rater_a_bpm = optional_index(row, c_ab, base, "rater_a_bpm");
    a.rater_a_uesc = optional_index(row, c_au, base, "rater_a_uesc");
    a.rater_b_bpm = optional_index(row, c_bb, base, "rater_b_bpm");
    a.rater_b_uesc = optional_index(row, c_bu, base, "rater_b_uesc");
    out.push_back(std::move(a));
  }
  return out;
}

void save_annotations(const fs::path& path, const std::vector<ClipAnnotation>& annotations) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const bool raters = std::any_of(annotations.begin(), annotations.end(), [](const ClipAnnotation& a) {
    return a.rater_a_bpm || a.rater_a_uesc || a.rater_b_bpm || a.rater_b_uesc;
  });
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  out << "#index_base=0\n";
  out << "clip_id,bpm,uesc" << (raters ? ",rater_a_bpm,rater_a_uesc,rater_b_bpm,rater_b_uesc" : "") << '\n';
  for (const auto& a : annotations) {
    out << a.clip_id << ',' << a.bpm_frame << ',' << a.uesc_frame;
    if (raters)
      out << ',' << opt(a.rater_a_bpm) << ',' << opt(a.rater_a_uesc) << ',' << opt(a.rater_b_bpm) << ','
          << opt(a.rater_b_uesc);
    out << '\n';
  }
}

void validate_annotations(const std::vector<ClipAnnotation>& annotations,
                          const std::vector<ClipManifestEntry>& manifest) {
  std::map<std::string, int> frames;
  for (const auto& e : manifest) frames[e.clip_id] = e.n_frames;
  for (const auto& a : annotations) {
    const auto it = frames.find(a.clip_id);
    if (it == frames.end()) throw DataError("annotation references unknown clip '" + a.clip_id + "'");
    const int n = it->second;
    if (a.bpm_frame < 0 || a.bpm_frame > a.uesc_frame || a.uesc_frame >= n)
      throw DataError("clip '" + a.clip_id + "': annotation violates 0 <= bpm <= uesc < n_frames");
    for (const auto& v : {a.rater_a_bpm, a.rater_a_uesc, a.rater_b_bpm, a.rater_b_uesc})
      if (v && (*v < 0 || *v >= n)) throw DataError("clip '" + a.clip_id + "': rater index out of range");
  }
}

LandmarkTable LandmarkTable::load(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int c_id = t.require_column("clip_id", path);
  const int c_f = t.require_column("frame", path);
  const int c_2x = t.require_column("c2x", path), c_2y = t.require_column("c2y", path);
  const int c_4x = t.require_column("c4x", path), c_4y = t.require_column("c4y", path);
  LandmarkTable table;
  for (const auto& row : t.rows) {
    SpineLandmarks lm{{io::parse_double(row[c_2x], "c2x"), io::parse_double(row[c_2y], "c2y")},
                      {io::parse_double(row[c_4x], "c4x"), io::parse_double(row[c_4y], "c4y")}};
    if (lm.c2.x == lm.c4.x && lm.c2.y == lm.c4.y)
      throw DataError(path.string() + ": coincident C2/C4 landmarks for clip '" + row[c_id] + "'");
    std::optional<int> frame;
    if (!row[c_f].empty()) frame = io::parse_int(row[c_f], "frame");
    table.set(row[c_id], frame, lm);
  }
  return table;
}

void LandmarkTable::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "clip_id,frame,c2x,c2y,c4x,c4y\n";
  auto row = [&](const std::string& id, const std::string& frame, const SpineLandmarks& lm) {
    out << id << ',' << frame << ',' << io::format_double(lm.c2.x) << ',' << io::format_double(lm.c2.y) << ','
        << io::format_double(lm.c4.x) << ',' << io::format_double(lm.c4.y) << '\n';
  };
  std::set<std::string> ids;
  for (const auto& [id, _] : per_frame_) ids.insert(id);
  for (const auto& [id, _] : clip_wide_) ids.insert(id);
  for (const auto& id : ids) {
    if (auto it = clip_wide_.find(id); it != clip_wide_.end()) row(id, "", it->second);
    if (auto it = per_frame_.find(id); it != per_frame_.end())
      for (const auto& [f, lm] : it->second) row(id, std::to_string(f), lm);
  }
}

void LandmarkTable::set(const std::string& clip_id, std::optional<int> frame, SpineLandmarks lm) {
  if (frame) per_frame_[clip_id][*frame] = lm;
  else clip_wide_[clip_id] = lm;
}

std::optional<LandmarkTable::Lookup> LandmarkTable::find(const std::string& clip_id, int frame) const {
  if (auto it = per_frame_.find(clip_id); it != per_frame_.end()) {
    if (auto f = it->second.find(frame); f != it->second.end()) return Lookup{f->second, false};
  }
  if (auto it = clip_wide_.find(clip_id); it != clip_wide_.end()) return Lookup{it->second, true};
  if (auto it = per_frame_.find(clip_id); it != per_frame_.end() && !it->second.empty()) {
    const SpineLandmarks* best = nullptr;
    int best_dist = 0;
    for (const auto& [f, lm] : it->second) {
      const int dist = std::abs(f - frame);
      if (!best || dist < best_dist) best = &lm, best_dist = dist;
    }
    return Lookup{*best, true};
  }
  return std::nullopt;
}

DatasetSplit subject_split(const std::vector<ClipManifestEntry>& entries, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw DataError("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");

  std::set<std::string> subject_set;
  for (const auto& e : entries) subject_set.insert(e.subject_id);
  std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
  const int n = static_cast<int>(subjects.size());
  const int n_val = static_cast<int>(std::lround(ratios[1] * n));
  const int n_test = static_cast<int>(std::lround(ratios[2] * n));
  const int n_train = n - n_val - n_test;
  if (n < 3 || n_val < 1 || n_test < 1 || n_train < 1)
    throw DataError("cannot split " + std::to_string(n) + " subject(s) into three nonempty partitions");

  Rng rng(seed);
  shuffle(subjects, rng);

  std::map<std::string, Subset> assignment;
  for (int i = 0; i < n; ++i)
    assignment[subjects[i]] = i < n_train ? Subset::train : (i < n_train + n_val ? Subset::val : Subset::test);

  DatasetSplit split;
  split.seed = seed;
  for (const auto& e : entries) {
    switch (assignment.at(e.subject_id)) {
      case Subset::train: split.train_clips.insert(e.clip_id); break;
      case Subset::val: split.val_clips.insert(e.clip_id); break;
      case Subset::test: split.test_clips.insert(e.clip_id); break;
    }
  }
  return split;
}

void save_split(const fs::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "#seed=" << split.seed << '\n' << "clip_id,subset\n";
  for (const auto& id : split.train_clips) out << id << ",train\n";
  for (const auto& id : split.val_clips) out << id << ",val\n";
  for (const auto& id : split.test_clips) out << id << ",test\n";
}

DatasetSplit load_split(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  DatasetSplit split;
  for (const auto& d : t.directives)
    if (d.rfind("#seed=", 0) == 0) split.seed = std::stoull(d.substr(6));
  const int c_id = t.require_column("clip_id", path);
  const int c_set = t.require_column("subset", path);
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    if (!seen.insert(row[c_id]).second) throw DataError(path.string() + ": clip listed twice: " + row[c_id]);
    switch (parse_subset(row[c_set])) {
      case Subset::train: split.train_clips.insert(row[c_id]); break;
      case Subset::val: split.val_clips.insert(row[c_id]); break;
      case Subset::test: split.test_clips.insert(row[c_id]); break;
    }
  }
  return split;
}

PhaseSequence label_frames(const ClipAnnotation& annotation, int n_frames) {
  if (n_frames < 1) throw DataError("clip must have at least one frame");
  if (annotation.bpm_frame < 0 || annotation.bpm_frame > annotation.uesc_frame || annotation.uesc_frame >= n_frames)
    throw DataError("clip '" + annotation.clip_id + "': annotation indices out of range");
  PhaseSequence seq(static_cast<std::size_t>(n_frames), Phase::N);
  std::fill(seq.begin() + annotation.bpm_frame, seq.begin() + annotation.uesc_frame + 1, Phase::P);
  return seq;
}

}  // namespace vfss
