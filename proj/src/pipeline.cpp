#include "vfss/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "vfss/cam.hpp"
#include "vfss/error.hpp"
#include "vfss/morphology.hpp"

namespace vfss {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

PreparedClip prepare_clip(const fs::path& clip, const ClaheParams& clahe, int net_side, bool keep_frames) {
  PreparedClip out;
  for (const Gray8& raw : io::load_clip(clip)) {
    ImageF f = preprocess_frame(raw, clahe);
    out.net.push_back(resize_to_net(f, net_side));
    if (keep_frames) out.frames.push_back(std::move(f));
  }
  return out;
}

std::vector<ClipManifestEntry> select_subset(const std::vector<ClipManifestEntry>& manifest,
                                             const DatasetSplit& split, Subset subset) {
  const auto& ids = subset == Subset::train ? split.train_clips
                    : subset == Subset::val ? split.val_clips
                                            : split.test_clips;
  std::vector<ClipManifestEntry> out;
  for (const auto& e : manifest)
    if (ids.count(e.clip_id)) out.push_back(e);
  if (out.size() != ids.size()) throw DataError("split references clips missing from the manifest");
  return out;
}

std::map<std::string, ClipAnnotation> index_annotations(const std::vector<ClipAnnotation>& annotations) {
  std::map<std::string, ClipAnnotation> out;
  for (const auto& a : annotations)
    if (!out.emplace(a.clip_id, a).second) throw DataError("duplicate annotation for clip '" + a.clip_id + "'");
  return out;
}

LabeledFrames gather_frames(const std::vector<ClipManifestEntry>& clips,
                            const std::map<std::string, ClipAnnotation>& annotations, const ClaheParams& clahe,
                            int net_side, int workers) {
  std::vector<PreparedClip> prepared(clips.size());
  std::vector<PhaseSequence> labels(clips.size());
  parallel_for(clips.size(), workers, [&](std::size_t i) {
    const auto it = annotations.find(clips[i].clip_id);
    if (it == annotations.end()) throw DataError("no annotation for clip '" + clips[i].clip_id + "'");
    prepared[i] = prepare_clip(clips[i].path, clahe, net_side, false);
    labels[i] = label_frames(it->second, static_cast<int>(prepared[i].net.size()));
  });
  LabeledFrames out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    for (auto& f : prepared[i].net) out.inputs.push_back(std::move(f));
    out.labels.insert(out.labels.end(), labels[i].begin(), labels[i].end());
  }
  return out;
}

void write_probs(const fs::path& path, const ClipPrediction& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "frame,prob_p,pred\n";
  for (std::size_t i = 0; i < p.frames.size(); ++i)
    out << i << ',' << io::format_fixed(p.frames[i].prob_p, 6) << ',' << (p.frames[i].predicted == Phase::P ? 'P' : 'N')
        << '\n';
}

ClipPrediction read_probs(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cf = t.require_column("frame", path), cp = t.require_column("prob_p", path);
  const int cl = t.require_column("pred", path);
  ClipPrediction out;
  for (const auto& row : t.rows) {
    if (io::parse_int(row[cf], "frame") != static_cast<int>(out.frames.size()))
      throw DataError(path.string() + ": frames must be listed in order from 0");
    FramePrediction fp;
    fp.prob_p = io::parse_double(row[cp], "prob_p");
    if (!(fp.prob_p >= 0.0 && fp.prob_p <= 1.0)) throw DataError(path.string() + ": prob_p outside [0, 1]");
    fp.prob_n = 1.0 - fp.prob_p;
    const auto lab = parse_phases(row[cl]);
    if (lab.size() != 1) throw DataError(path.string() + ": pred must be P or N");
    fp.predicted = lab[0];
    out.frames.push_back(fp);
    out.labels.push_back(lab[0]);
  }
  return out;
}

void write_events(const fs::path& path, const std::vector<EventRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  out << "clip_id,bpm,uesc\n";
  for (const auto& r : rows) out << r.clip_id << ',' << opt(r.detection.bpm) << ',' << opt(r.detection.uesc) << '\n';
}

std::vector<EventRow> read_events(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int ci = t.require_column("clip_id", path), cb = t.require_column("bpm", path);
  const int cu = t.require_column("uesc", path);
  std::vector<EventRow> out;
  auto opt = [](const std::string& s, std::string_view what) -> std::optional<int> {
    if (s.empty()) return std::nullopt;
    return io::parse_int(s, what);
  };
  for (const auto& row : t.rows) out.push_back({row[ci], {opt(row[cb], "bpm"), opt(row[cu], "uesc")}});
  return out;
}

void write_bolus(const fs::path& path, const std::vector<BolusRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "frame,cx,cy,x_min,y_min,x_max,y_max,detected\n";
  for (const auto& r : rows) {
    out << r.frame << ',';
    if (r.detected)
      out << io::format_fixed(r.centroid.x, 4) << ',' << io::format_fixed(r.centroid.y, 4) << ',' << r.bbox.x_min << ','
          << r.bbox.y_min << ',' << r.bbox.x_max << ',' << r.bbox.y_max << ",1\n";
    else
      out << ",,,,,,0\n";
  }
}

std::vector<BolusRow> read_bolus(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int cf = t.require_column("frame", path), cx = t.require_column("cx", path), cy = t.require_column("cy", path);
  const int x0 = t.require_column("x_min", path), y0 = t.require_column("y_min", path);
  const int x1 = t.require_column("x_max", path), y1 = t.require_column("y_max", path);
  const int cd = t.require_column("detected", path);
  std::vector<BolusRow> out;
  for (const auto& row : t.rows) {
    BolusRow r;
    r.frame = io::parse_int(row[cf], "frame");
    r.detected = io::parse_int(row[cd], "detected") != 0;
    if (r.detected) {
      r.centroid = {io::parse_double(row[cx], "cx"), io::parse_double(row[cy], "cy")};
      r.bbox = {io::parse_int(row[x0], "x_min"), io::parse_int(row[y0], "y_min"), io::parse_int(row[x1], "x_max"),
                io::parse_int(row[y1], "y_max")};
    }
    out.push_back(r);
  }
  return out;
}

io::RgbImage make_overlay(const ImageF& frame, const Mask* predicted, const Point2* centroid, const Mask* truth) {
  io::RgbImage img(frame.rows(), frame.cols());
  for (int r = 0; r < frame.rows(); ++r)
    for (int c = 0; c < frame.cols(); ++c) {
      const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(frame(r, c), 0.0f, 1.0f) * 255.0f));
      img(r, c) = {v, v, v};
    }
  auto outline = [&](const Mask& m, io::Rgb color) {
    const Mask inner = morph::erode3x3(m);
    for (int r = 0; r < m.rows() && r < img.rows(); ++r)
      for (int c = 0; c < m.cols() && c < img.cols(); ++c)
        if (m(r, c) && !inner(r, c)) img(r, c) = color;
  };
  if (truth) outline(*truth, {0, 0, 255});
  if (predicted) outline(*predicted, {255, 255, 0});
  if (centroid) {
    const int cr = static_cast<int>(std::lround(centroid->y)), cc = static_cast<int>(std::lround(centroid->x));
    for (int dr = -2; dr <= 2; ++dr)
      for (int dc = -2; dc <= 2; ++dc)
        if (dr * dr + dc * dc <= 4 && img.contains(cr + dr, cc + dc)) img(cr + dr, cc + dc) = {255, 0, 0};
  }
  return img;
}

ImageF cam_for_frame(const PhaseClassifier& model, const ImageF& net_input) {
  return upsample_map(grad_cam(model.feature_gradients(net_input, Phase::P)), kCropSide).values;
}

std::string format_frame_file(std::string_view prefix, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*s_%04d.png", static_cast<int>(prefix.size()), prefix.data(), frame);
  return buf;
}

std::vector<BolusRow> localize_clip(const PhaseClassifier& model, const PreparedClip& clip,
                                    const LocalizeOptions& options) {
  const int n = static_cast<int>(clip.net.size());
  if (clip.frames.size() != clip.net.size()) throw Error("localize_clip needs the preprocessed frames");
  std::vector<int> frames = options.frames;
  if (frames.empty())
    for (int f = 0; f < n; ++f) frames.push_back(f);
  if (options.image_dir) io::ensure_directory(*options.image_dir);

  std::vector<BolusRow> rows;
  for (int f : frames) {
    if (f < 0 || f >= n) throw DataError("frame " + std::to_string(f) + " outside the clip");
    BolusRow row;
    row.frame = f;
    const FeatureGradients fg = model.feature_gradients(clip.net[f], Phase::P);
    const FramePrediction pred = prediction_from_logits(fg.logits);
    std::optional<BolusEstimate> est;
    if (pred.predicted == Phase::P) {
      const ActivationMap cam = grad_cam(fg);
      if (cam.positive_fraction >= options.refine.min_positive_fraction)
        est = localize(clip.frames[f], upsample_map(cam, kCropSide).values, options.refine);
    }
    if (est) {
      row.detected = true;
      row.centroid = est->centroid;
      row.bbox = est->bbox;
    }
    if (options.image_dir) {
      const Mask* truth = nullptr;
      if (options.truth_masks)
        if (auto it = options.truth_masks->find(f); it != options.truth_masks->end()) truth = &it->second;
      if (est) {
        Gray8 png(est->mask.rows(), est->mask.cols());
        for (std::size_t i = 0; i < png.size(); ++i) png.pixels()[i] = est->mask.pixels()[i] ? 255 : 0;
        io::write_png(*options.image_dir / format_frame_file("mask", f), png);
      }
      if (options.overlays)
        io::write_png(*options.image_dir / format_frame_file("overlay", f),
                      make_overlay(clip.frames[f], est ? &est->mask : nullptr, est ? &est->centroid : nullptr, truth));
    }
    rows.push_back(row);
  }
  return rows;
}

Mask read_mask(const fs::path& path) {
  const Gray8 g = io::read_gray(path);
  Mask m(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) m.pixels()[i] = g.pixels()[i] > 127 ? 1 : 0;
  return m;
}

}  // namespace vfss
