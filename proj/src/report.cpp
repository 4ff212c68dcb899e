#include "vfss/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "vfss/error.hpp"
#include "vfss/geometry.hpp"
#include "vfss/io.hpp"

namespace vfss {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) io::ensure_directory(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string opt_fixed(const std::optional<double>& v, int digits) {
  return v ? io::format_fixed(*v, digits) : std::string();
}

std::optional<double> opt_parse(const std::string& s, std::string_view what) {
  if (s.empty()) return std::nullopt;
  return io::parse_double(s, what);
}

std::string rmse_field(const LocalizationRow& r) {
  if (!r.rmse_median) return {};
  return format_median_iqr(*r.rmse_median, *r.rmse_q1, *r.rmse_q3);
}

void parse_rmse_field(const std::string& s, LocalizationRow& r) {
  if (s.empty()) return;
  double m = 0, a = 0, b = 0;
  if (std::sscanf(s.c_str(), "%lf (%lf-%lf)", &m, &a, &b) != 3) throw DataError("malformed rmse field '" + s + "'");
  r.rmse_median = m;
  r.rmse_q1 = a;
  r.rmse_q3 = b;
}

/// Left-aligned fixed-width text table.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], r[i].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out += line + '\n';
  }
  return out;
}

LocalizationRow summarize_frames(const std::string& backbone, std::string bucket,
                                 const std::vector<const LocalizationFrame*>& frames) {
  LocalizationRow row;
  row.backbone = backbone;
  row.consistency = std::move(bucket);
  row.n = frames.size();
  std::vector<double> ty, py, err;
  for (const auto* f : frames) {
    if (!f->detected) continue;
    ++row.n_detected;
    ty.push_back(f->truth_y);
    py.push_back(f->pred_y);
    err.push_back(f->error);
  }
  if (ty.size() >= 2) {
    try {
      row.r_y = pearson_r(ty, py);
    } catch (const DataError&) {
    }
  }
  if (!err.empty()) {
    row.rmse_median = quantile(err, 0.5);
    row.rmse_q1 = quantile(err, 0.25);
    row.rmse_q3 = quantile(err, 0.75);
  }
  return row;
}

}  // namespace

PhaseEvaluation evaluate_phase(const std::string& backbone, const std::vector<ClipManifestEntry>& clips,
                               const std::map<std::string, ClipAnnotation>& annotations,
                               const std::map<std::string, PhaseSequence>& predicted_labels,
                               const std::map<std::string, PhaseDetection>& events, int tolerance) {
  if (clips.empty()) throw DataError("no clips to evaluate");
  PhaseEvaluation ev;
  for (const auto& e : clips) {
    const auto a = annotations.find(e.clip_id);
    if (a == annotations.end()) throw DataError("no annotation for clip '" + e.clip_id + "'");
    const auto p = predicted_labels.find(e.clip_id);
    if (p == predicted_labels.end()) throw DataError("no predictions for clip '" + e.clip_id + "'");
    PhaseClipResult r;
    r.clip_id = e.clip_id;
    r.consistency = e.consistency;
    r.bpm = a->second.bpm_frame;
    r.uesc = a->second.uesc_frame;
    if (const auto ev_it = events.find(e.clip_id); ev_it != events.end()) r.predicted = ev_it->second;
    r.counts = count_frames(p->second, label_frames(a->second, static_cast<int>(p->second.size())));
    ev.clips.push_back(r);
  }

  auto summarize = [&](std::string bucket, const std::vector<const PhaseClipResult*>& sel) {
    PhaseRow row;
    row.backbone = backbone;
    row.consistency = std::move(bucket);
    row.n = sel.size();
    if (sel.empty()) return row;
    Counts total;
    std::vector<std::optional<int>> pb, pu;
    std::vector<int> gb, gu;
    for (const auto* c : sel) {
      total.tp += c->counts.tp;
      total.fp += c->counts.fp;
      total.fn += c->counts.fn;
      pb.push_back(c->predicted.bpm);
      pu.push_back(c->predicted.uesc);
      gb.push_back(c->bpm);
      gu.push_back(c->uesc);
    }
    row.f1 = f1_from_counts(total);
    row.p3_bpm = p3(pb, gb, tolerance);
    row.p3_uesc = p3(pu, gu, tolerance);
    return row;
  };
  std::vector<const PhaseClipResult*> all;
  for (const auto& c : ev.clips) all.push_back(&c);
  ev.overall = summarize(std::string(kAllBucket), all);
  for (Consistency level : kAllConsistencies) {
    std::vector<const PhaseClipResult*> sel;
    for (const auto& c : ev.clips)
      if (c.consistency == level) sel.push_back(&c);
    ev.by_consistency.push_back(summarize(std::string(to_string(level)), sel));
  }
  return ev;
}

void write_phase_table(const fs::path& path, const std::vector<PhaseRow>& rows) {
  auto out = open_out(path);
  out << "backbone,f1,p3_bpm,p3_uesc\n";
  for (const auto& r : rows)
    out << r.backbone << ',' << io::format_fixed(r.f1, 3) << ',' << io::format_fixed(r.p3_bpm, 2) << ','
        << io::format_fixed(r.p3_uesc, 2) << '\n';
}

void write_phase_by_consistency(const fs::path& path, const std::vector<PhaseRow>& rows) {
  auto out = open_out(path);
  out << "consistency,backbone,n,f1,p3_bpm,p3_uesc\n";
  for (const auto& r : rows) {
    out << r.consistency << ',' << r.backbone << ',' << r.n << ',';
    if (r.n == 0) out << ",,\n";
    else
      out << io::format_fixed(r.f1, 3) << ',' << io::format_fixed(r.p3_bpm, 2) << ',' << io::format_fixed(r.p3_uesc, 2)
          << '\n';
  }
}

void write_phase_clips(const fs::path& path, const std::vector<PhaseClipResult>& clips) {
  auto out = open_out(path);
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  out << "clip_id,consistency,bpm,uesc,pred_bpm,pred_uesc,tp,fp,fn\n";
  for (const auto& c : clips)
    out << c.clip_id << ',' << to_string(c.consistency) << ',' << c.bpm << ',' << c.uesc << ','
        << opt(c.predicted.bpm) << ',' << opt(c.predicted.uesc) << ',' << c.counts.tp << ',' << c.counts.fp << ','
        << c.counts.fn << '\n';
}

std::vector<PhaseRow> read_phase_table(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cb = t.require_column("backbone", path), cf = t.require_column("f1", path);
  const int c1 = t.require_column("p3_bpm", path), c2 = t.require_column("p3_uesc", path);
  std::vector<PhaseRow> out;
  for (const auto& row : t.rows) {
    PhaseRow r;
    r.backbone = row[cb];
    r.f1 = io::parse_double(row[cf], "f1");
    r.p3_bpm = io::parse_double(row[c1], "p3_bpm");
    r.p3_uesc = io::parse_double(row[c2], "p3_uesc");
    out.push_back(r);
  }
  return out;
}

std::vector<PhaseRow> read_phase_by_consistency(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cc = t.require_column("consistency", path), cb = t.require_column("backbone", path);
  const int cn = t.require_column("n", path), cf = t.require_column("f1", path);
  const int c1 = t.require_column("p3_bpm", path), c2 = t.require_column("p3_uesc", path);
  std::vector<PhaseRow> out;
  for (const auto& row : t.rows) {
    PhaseRow r;
    r.consistency = row[cc];
    r.backbone = row[cb];
    r.n = static_cast<std::size_t>(io::parse_int(row[cn], "n"));
    if (r.n > 0) {
      r.f1 = io::parse_double(row[cf], "f1");
      r.p3_bpm = io::parse_double(row[c1], "p3_bpm");
      r.p3_uesc = io::parse_double(row[c2], "p3_uesc");
    }
    out.push_back(r);
  }
  return out;
}

std::map<std::string, std::map<int, GroundTruthFrame>> truth_from_csv(const fs::path& path) {
  std::map<std::string, std::map<int, GroundTruthFrame>> out;
  for (const auto& [clip, frames] : load_truth(path))
    for (std::size_t f = 0; f < frames.size(); ++f) out[clip][static_cast<int>(f)] = {frames[f].center, frames[f].bbox};
  return out;
}

std::map<int, GroundTruthFrame> truth_from_masks(const fs::path& dir, const std::string& clip_id) {
  std::map<int, GroundTruthFrame> out;
  const fs::path clip_dir = dir / clip_id;
  for (const auto& file : io::list_frame_files(clip_dir)) {
    const Mask m = read_mask(file);
    if (count_foreground(m) == 0) continue;
    const std::string stem = file.stem().string();
    const auto us = stem.find_last_of('_');
    const int frame = io::parse_int(us == std::string::npos ? stem : stem.substr(us + 1), "mask frame");
    const auto [c, b] = centroid_and_bbox(m);
    out[frame] = {c, b};
  }
  return out;
}

LocalizationEvaluation evaluate_localization(
    const std::string& backbone, const std::vector<ClipManifestEntry>& clips,
    const std::map<std::string, ClipAnnotation>& annotations, const LandmarkTable& landmarks,
    const std::map<std::string, std::map<int, GroundTruthFrame>>& truth,
    const std::map<std::string, std::vector<BolusRow>>& predictions, const std::vector<double>& thresholds) {
  if (clips.empty()) throw DataError("no clips to evaluate");
  LocalizationEvaluation ev;
  for (const auto& e : clips) {
    const auto a = annotations.find(e.clip_id);
    if (a == annotations.end()) throw DataError("no annotation for clip '" + e.clip_id + "'");
    const auto t = truth.find(e.clip_id);
    if (t == truth.end()) throw DataError("no ground-truth bolus positions for clip '" + e.clip_id + "'");
    const auto p = predictions.find(e.clip_id);
    if (p == predictions.end()) throw DataError("no localization output for clip '" + e.clip_id + "'");
    std::map<int, const BolusRow*> by_frame;
    for (const auto& r : p->second) by_frame[r.frame] = &r;

    for (int f = a->second.bpm_frame; f <= a->second.uesc_frame; ++f) {
      const auto tf = t->second.find(f);
      if (tf == t->second.end())
        throw DataError("clip '" + e.clip_id + "' has no ground-truth bolus at frame " + std::to_string(f));
      const auto pf = by_frame.find(f);
      if (pf == by_frame.end())
        throw DataError("localization output of clip '" + e.clip_id + "' lacks frame " + std::to_string(f));
      const auto lm = landmarks.find(e.clip_id, f);
      if (!lm) throw DataError("no spine landmarks for clip '" + e.clip_id + "'");
      const SpineTransform st = spine_transform(lm->landmarks);

      LocalizationFrame lf;
      lf.clip_id = e.clip_id;
      lf.consistency = e.consistency;
      lf.frame = f;
      lf.truth = tf->second;
      lf.predicted = *pf->second;
      lf.detected = pf->second->detected;
      lf.truth_y = to_spine(lf.truth.centroid, st).y;
      if (lf.detected) {
        lf.pred_y = to_spine(lf.predicted.centroid, st).y;
        const double dx = lf.predicted.centroid.x - lf.truth.centroid.x;
        const double dy = lf.predicted.centroid.y - lf.truth.centroid.y;
        lf.error = std::sqrt(dx * dx + dy * dy) / st.distance;
      }
      ev.frames.push_back(lf);
    }
  }

  std::vector<const LocalizationFrame*> all;
  for (const auto& f : ev.frames) all.push_back(&f);
  ev.overall = summarize_frames(backbone, std::string(kAllBucket), all);
  for (Consistency level : kAllConsistencies) {
    std::vector<const LocalizationFrame*> sel;
    for (const auto& f : ev.frames)
      if (f.consistency == level) sel.push_back(&f);
    ev.by_consistency.push_back(summarize_frames(backbone, std::string(to_string(level)), sel));
  }

  std::vector<std::optional<Box>> pred;
  std::vector<Box> gt;
  for (const auto& f : ev.frames) {
    pred.push_back(f.detected ? std::optional<Box>(to_box(f.predicted.bbox)) : std::nullopt);
    gt.push_back(to_box(f.truth.bbox));
  }
  ev.sweep = bbox_f1_sweep(pred, gt, thresholds);
  return ev;
}

void write_localization_table(const fs::path& path, const std::vector<LocalizationRow>& rows) {
  auto out = open_out(path);
  out << "backbone,r_y,rmse\n";
  for (const auto& r : rows) out << r.backbone << ',' << opt_fixed(r.r_y, 3) << ',' << rmse_field(r) << '\n';
}

void write_localization_by_consistency(const fs::path& path, const std::vector<LocalizationRow>& rows) {
  auto out = open_out(path);
  out << "consistency,backbone,n,n_detected,r_y,rmse\n";
  for (const auto& r : rows)
    out << r.consistency << ',' << r.backbone << ',' << r.n << ',' << r.n_detected << ',' << opt_fixed(r.r_y, 3)
        << ',' << rmse_field(r) << '\n';
}

void write_localization_frames(const fs::path& path, const std::vector<LocalizationFrame>& frames) {
  auto out = open_out(path);
  out << "clip_id,consistency,frame,detected,truth_y,pred_y,error\n";
  for (const auto& f : frames) {
    out << f.clip_id << ',' << to_string(f.consistency) << ',' << f.frame << ',' << (f.detected ? 1 : 0) << ','
        << io::format_fixed(f.truth_y, 4) << ',';
    if (f.detected) out << io::format_fixed(f.pred_y, 4) << ',' << io::format_fixed(f.error, 6) << '\n';
    else out << ",\n";
  }
}

void write_sweep(const fs::path& path, const std::string& backbone, const std::vector<SweepPoint>& sweep) {
  auto out = open_out(path);
  out << "backbone,threshold,f1\n";
  for (const auto& p : sweep)
    out << backbone << ',' << io::format_fixed(p.threshold, 2) << ',' << io::format_fixed(p.f1, 4) << '\n';
}

std::vector<SweepRow> read_sweep(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cb = t.require_column("backbone", path), ct = t.require_column("threshold", path);
  const int cf = t.require_column("f1", path);
  std::vector<SweepRow> out;
  for (const auto& row : t.rows)
    out.push_back({row[cb], io::parse_double(row[ct], "threshold"), io::parse_double(row[cf], "f1")});
  return out;
}

std::vector<LocalizationRow> read_localization_table(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cb = t.require_column("backbone", path), cr = t.require_column("r_y", path);
  const int cm = t.require_column("rmse", path);
  std::vector<LocalizationRow> out;
  for (const auto& row : t.rows) {
    LocalizationRow r;
    r.backbone = row[cb];
    r.r_y = opt_parse(row[cr], "r_y");
    parse_rmse_field(row[cm], r);
    out.push_back(r);
  }
  return out;
}

std::vector<LocalizationRow> read_localization_by_consistency(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cc = t.require_column("consistency", path), cb = t.require_column("backbone", path);
  const int cn = t.require_column("n", path), cd = t.require_column("n_detected", path);
  const int cr = t.require_column("r_y", path), cm = t.require_column("rmse", path);
  std::vector<LocalizationRow> out;
  for (const auto& row : t.rows) {
    LocalizationRow r;
    r.consistency = row[cc];
    r.backbone = row[cb];
    r.n = static_cast<std::size_t>(io::parse_int(row[cn], "n"));
    r.n_detected = static_cast<std::size_t>(io::parse_int(row[cd], "n_detected"));
    r.r_y = opt_parse(row[cr], "r_y");
    parse_rmse_field(row[cm], r);
    out.push_back(r);
  }
  return out;
}

std::vector<LocalizationFrame> read_localization_frames(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int ci = t.require_column("clip_id", path), cc = t.require_column("consistency", path);
  const int cf = t.require_column("frame", path), cd = t.require_column("detected", path);
  const int ct = t.require_column("truth_y", path), cp = t.require_column("pred_y", path);
  const int ce = t.require_column("error", path);
  std::vector<LocalizationFrame> out;
  for (const auto& row : t.rows) {
    LocalizationFrame f;
    f.clip_id = row[ci];
    f.consistency = parse_consistency(row[cc]);
    f.frame = io::parse_int(row[cf], "frame");
    f.detected = io::parse_int(row[cd], "detected") != 0;
    f.truth_y = io::parse_double(row[ct], "truth_y");
    if (f.detected) {
      f.pred_y = io::parse_double(row[cp], "pred_y");
      f.error = io::parse_double(row[ce], "error");
    }
    out.push_back(f);
  }
  return out;
}

std::optional<FriedmanResult> compare_backbones(const std::vector<std::string>& backbones,
                                                const std::vector<std::vector<LocalizationFrame>>& frames) {
  if (backbones.size() < 2 || frames.size() != backbones.size()) return std::nullopt;
  using Key = std::pair<std::string, int>;
  std::vector<std::map<Key, double>> errs(frames.size());
  for (std::size_t b = 0; b < frames.size(); ++b)
    for (const auto& f : frames[b])
      if (f.detected) errs[b][{f.clip_id, f.frame}] = f.error;
  std::vector<std::vector<double>> matrix;
  for (const auto& [key, e0] : errs[0]) {
    std::vector<double> row{e0};
    for (std::size_t b = 1; b < errs.size(); ++b) {
      const auto it = errs[b].find(key);
      if (it == errs[b].end()) break;
      row.push_back(it->second);
    }
    if (row.size() == errs.size()) matrix.push_back(std::move(row));
  }
  if (matrix.size() < 2) return std::nullopt;
  FriedmanResult res = friedman(matrix);
  if (res.p_value < 0.05) res = posthoc_mean_ranks(res, 0.05);
  return res;
}

std::string phase_text_table(const std::vector<PhaseRow>& overall, const std::vector<PhaseRow>& by_consistency) {
  std::vector<std::vector<std::string>> t = {{"Backbone", "F1-score", "P3_BPM (%)", "P3_UESC (%)"}};
  for (const auto& r : overall)
    t.push_back({r.backbone, io::format_fixed(r.f1, 3), io::format_fixed(r.p3_bpm, 2), io::format_fixed(r.p3_uesc, 2)});
  std::vector<std::vector<std::string>> c = {{"Consistency", "Backbone", "n", "F1-score", "P3_BPM (%)", "P3_UESC (%)"}};
  for (const auto& r : by_consistency) {
    if (r.n == 0) c.push_back({r.consistency, r.backbone, "0", "-", "-", "-"});
    else
      c.push_back({r.consistency, r.backbone, std::to_string(r.n), io::format_fixed(r.f1, 3),
                   io::format_fixed(r.p3_bpm, 2), io::format_fixed(r.p3_uesc, 2)});
  }
  return "Pharyngeal phase detection\n" + render_table(t) + "\nBy bolus consistency\n" + render_table(c);
}

std::string localization_text_table(const std::vector<LocalizationRow>& overall,
                                    const std::vector<LocalizationRow>& by_consistency,
                                    const std::optional<FriedmanResult>& friedman_result,
                                    const std::vector<std::string>& backbones) {
  auto ry = [](const LocalizationRow& r) { return r.r_y ? io::format_fixed(*r.r_y, 3) : std::string("-"); };
  auto rm = [](const LocalizationRow& r) { return r.rmse_median ? rmse_field(r) : std::string("-"); };
  std::vector<std::vector<std::string>> t = {{"Backbone", "r_y", "RMSE median (IQR)"}};
  for (const auto& r : overall) t.push_back({r.backbone, ry(r), rm(r)});
  std::vector<std::vector<std::string>> c = {{"Consistency", "Backbone", "n", "detected", "r_y", "RMSE median (IQR)"}};
  for (const auto& r : by_consistency)
    c.push_back({r.consistency, r.backbone, std::to_string(r.n), std::to_string(r.n_detected), ry(r), rm(r)});
  std::string s = "Bolus localization\n" + render_table(t);
  if (friedman_result) {
    s += "Friedman: " + format_friedman(*friedman_result) + '\n';
    if (!friedman_result->significant.empty()) {
      s += "Post-hoc (rank-based Tukey-Kramer on mean ranks, alpha 0.05):\n";
      for (std::size_t i = 0; i < backbones.size(); ++i)
        for (std::size_t j = i + 1; j < backbones.size(); ++j)
          s += "  " + backbones[i] + " vs " + backbones[j] + ": " +
               (friedman_result->significant[i][j] ? "significant" : "not significant") + '\n';
    }
  }
  return s + "\nBy bolus consistency\n" + render_table(c);
}

InterraterReport interrater(const std::vector<ClipAnnotation>& annotations, int tolerance) {
  InterraterReport rep;
  std::vector<int> ab, bb, au, bu;
  for (const auto& a : annotations) {
    if (!(a.rater_a_bpm && a.rater_b_bpm && a.rater_a_uesc && a.rater_b_uesc)) continue;
    ab.push_back(*a.rater_a_bpm);
    bb.push_back(*a.rater_b_bpm);
    au.push_back(*a.rater_a_uesc);
    bu.push_back(*a.rater_b_uesc);
  }
  rep.n = ab.size();
  try {
    rep.bpm = interrater_agreement(ab, bb, tolerance);
  } catch (const DataError&) {
  }
  try {
    rep.uesc = interrater_agreement(au, bu, tolerance);
  } catch (const DataError&) {
  }
  return rep;
}

}  // namespace vfss
