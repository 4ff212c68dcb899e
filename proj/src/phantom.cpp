#include "vfss/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "vfss/error.hpp"
#include "vfss/io.hpp"
#include "vfss/preprocess.hpp"
#include "vfss/random.hpp"

namespace vfss {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool inside_quad(const std::array<Point2, 4>& q, Point2 p) {
  bool pos = false, neg = false;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(q[i], q[(i + 1) % 4], p);
    pos |= c > 0;
    neg |= c < 0;
  }
  return !(pos && neg);
}

bool inside_ellipse(double x, double y, Point2 c, double sx, double sy) {
  const double dx = (x - c.x) / sx, dy = (y - c.y) / sy;
  return dx * dx + dy * dy <= 1.0;
}

bool inside_rect(const RectF& r, double x, double y) { return x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1; }

std::string frame_name(std::string_view prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s_%04d.png", static_cast<int>(prefix.size()), prefix.data(), i);
  return buf;
}

std::string id_name(char tag, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*d", tag, width, i);
  return buf;
}

/// Static part of a frame (background, anatomy, distractors) in [0, 1].
Image<double> render_static(const PhantomConfig& c, Pixel off) {
  Image<double> img(c.rows, c.cols, c.background_level);
  for (int r = 0; r < c.rows; ++r) {
    const double y = r - off.row;
    for (int col = 0; col < c.cols; ++col) {
      const double x = col - off.col;
      double tex = 0.0;
      for (const auto& t : c.texture) tex += t[0] * std::cos(2.0 * kPi * (t[1] * x + t[2] * y) + t[3]);
      double v = c.background_level + tex;
      if (x >= 0 && y >= 0 && x < kCropSide && y < kCropSide) {
        for (const auto& vb : c.vertebrae)
          if (inside_quad(vb.corners, {x, y})) v = c.vertebra_intensity + tex;
        if (inside_rect(c.airway, x, y)) v += c.airway_gain;
        for (const auto& d : c.distractors)
          if (inside_ellipse(x, y, d.center, d.semi_x, d.semi_y)) v = d.intensity;
      }
      img(r, col) = v;
    }
  }
  return img;
}

}  // namespace

std::string_view to_string(Difficulty d) { return d == Difficulty::standard ? "standard" : "hard"; }

Difficulty parse_difficulty(std::string_view s) {
  if (s == "standard") return Difficulty::standard;
  if (s == "hard") return Difficulty::hard;
  throw DataError("unknown difficulty '" + std::string(s) + "' (expected standard or hard)");
}

Point2 PhantomConfig::center_at(int frame) const {
  if (path.empty()) throw DataError("phantom path has no keyframes");
  if (frame <= path.front().frame) return path.front().center;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto& a = path[i - 1];
    const auto& b = path[i];
    if (frame <= b.frame) {
      const double t = b.frame == a.frame ? 1.0 : double(frame - a.frame) / double(b.frame - a.frame);
      return {a.center.x + t * (b.center.x - a.center.x), a.center.y + t * (b.center.y - a.center.y)};
    }
  }
  return path.back().center;
}

void PhantomConfig::validate() const {
  if (rows < kCropSide || cols < kCropSide)
    throw DataError("phantom frame must be at least " + std::to_string(kCropSide) + " px on each side");
  if (n_frames < 1) throw DataError("phantom needs at least one frame");
  if (!(0 <= entry_frame && entry_frame < exit_frame && exit_frame < n_frames))
    throw DataError("phantom requires 0 <= entry < exit < n_frames");
  if (!(bolus_semi_x > 0 && bolus_semi_y > 0)) throw DataError("bolus semi-axes must be positive");
  if (!(fps > 0)) throw DataError("fps must be positive");
  if (noise_sigma < 0) throw DataError("noise sigma must be non-negative");
  for (std::size_t i = 1; i < path.size(); ++i)
    if (path[i].frame < path[i - 1].frame) throw DataError("phantom path keyframes must be ordered");
  for (int f = 0; f < n_frames; ++f) {
    const Point2 p = center_at(f);
    if (p.x - bolus_semi_x < 0 || p.y - bolus_semi_y < 0 || p.x + bolus_semi_x > kCropSide - 1 ||
        p.y + bolus_semi_y > kCropSide - 1)
      throw DataError("bolus leaves the frame at frame " + std::to_string(f));
  }
}

Mask render_bolus_mask(const PhantomConfig& config, int frame) {
  const Point2 c = config.center_at(frame);
  Mask m(kCropSide, kCropSide, 0);
  const int r0 = std::max(0, int(std::floor(c.y - config.bolus_semi_y)));
  const int r1 = std::min(kCropSide - 1, int(std::ceil(c.y + config.bolus_semi_y)));
  const int c0 = std::max(0, int(std::floor(c.x - config.bolus_semi_x)));
  const int c1 = std::min(kCropSide - 1, int(std::ceil(c.x + config.bolus_semi_x)));
  for (int r = r0; r <= r1; ++r)
    for (int col = c0; col <= c1; ++col)
      if (inside_ellipse(col, r, c, config.bolus_semi_x, config.bolus_semi_y)) m(r, col) = 1;
  return m;
}

bool touches_roi(const Mask& mask, const RectF& roi) {
  const int r0 = std::max(0, int(std::ceil(roi.y0))), r1 = std::min(mask.rows() - 1, int(std::floor(roi.y1)));
  const int c0 = std::max(0, int(std::ceil(roi.x0))), c1 = std::min(mask.cols() - 1, int(std::floor(roi.x1)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (mask(r, c)) return true;
  return false;
}

PhantomClip generate_clip(const PhantomConfig& config) {
  config.validate();
  const Pixel off = crop_offset(config.rows, config.cols);
  const Image<double> base = render_static(config, off);

  PhantomClip clip;
  clip.annotation.bpm_frame = config.entry_frame;
  clip.annotation.uesc_frame = config.exit_frame;
  for (int f = 0; f < config.n_frames; ++f) {
    Mask mask = render_bolus_mask(config, f);
    const bool in_phase = f >= config.entry_frame && f <= config.exit_frame;
    if (touches_roi(mask, config.roi) != in_phase)
      throw DataError("phantom path " + std::string(in_phase ? "misses" : "touches") + " the pharynx ROI at frame " +
                      std::to_string(f));

    Image<double> v = base;
    for (int r = 0; r < kCropSide; ++r)
      for (int c = 0; c < kCropSide; ++c)
        if (mask(r, c)) v(r + off.row, c + off.col) = config.bolus_intensity;
    Gray8 frame(config.rows, config.cols);
    Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(f));
    auto src = v.pixels();
    auto dst = frame.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
      double x = src[i];
      if (config.noise_sigma > 0) x += config.noise_sigma * rng.normal();
      dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
    }
    clip.frames.push_back(std::move(frame));

    PhantomTruth t;
    t.center = config.center_at(f);
    const auto [centroid, bbox] = centroid_and_bbox(mask);
    t.centroid = centroid;
    t.bbox = bbox;
    clip.truth.push_back(t);
    if (in_phase) clip.annotation.bolus_masks[f] = mask;
    clip.masks.push_back(std::move(mask));
  }
  return clip;
}

PhantomSubject make_subject(int index, Difficulty difficulty, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x5B1EC7ULL + static_cast<std::uint64_t>(index));
  PhantomSubject s;
  s.subject_id = id_name('S', index, 3);

  const double tilt = rng.uniform(-6.0, 6.0) * kPi / 180.0;
  const Point2 down{std::sin(tilt), std::cos(tilt)};
  const Point2 back{std::cos(tilt), -std::sin(tilt)};
  const Point2 c2{rng.uniform(212.0, 232.0), rng.uniform(92.0, 108.0)};
  const double pitch = rng.uniform(42.0, 48.0);
  const double height = pitch - 8.0;
  const double width = rng.uniform(50.0, 58.0);
  for (int k = 0; k < 5; ++k) {
    const Point2 ai{c2.x + k * pitch * down.x, c2.y + k * pitch * down.y};
    const Point2 as{ai.x - height * down.x, ai.y - height * down.y};
    Vertebra v;
    v.corners = {as, Point2{as.x + width * back.x, as.y + width * back.y},
                 Point2{ai.x + width * back.x, ai.y + width * back.y}, ai};
    s.vertebrae.push_back(v);
  }
  s.spine.c2 = c2;
  s.spine.c4 = {c2.x + 2 * pitch * down.x, c2.y + 2 * pitch * down.y};

  s.roi.x1 = std::min(s.spine.c2.x, s.spine.c4.x) - 8.0;
  s.roi.x0 = s.roi.x1 - 52.0;
  s.roi.y0 = s.spine.c2.y - 45.0;
  s.roi.y1 = s.spine.c4.y + 25.0;
  s.airway = {s.roi.x0 + 12.0, s.roi.y0 - 10.0, s.roi.x1 - 14.0, s.roi.y1 + 40.0};

  s.background_level = rng.uniform(0.6, 0.7);
  for (int i = 0; i < 5; ++i) {
    const double amp = rng.uniform(0.01, 0.03);
    const double freq = rng.uniform(1.0 / 200.0, 1.0 / 60.0);
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    s.texture.push_back({amp, freq * std::cos(dir), freq * std::sin(dir), rng.uniform(0.0, 2.0 * kPi)});
  }

  if (difficulty == Difficulty::hard) {
    // Dark blobs kept clear of the region the bolus can visit.
    const RectF keep_out{s.roi.x0 - 125.0, s.roi.y0 - 35.0, s.roi.x1 + 25.0, double(kCropSide)};
    while (s.distractors.size() < 3) {
      Ellipse e;
      e.semi_x = rng.uniform(6.0, 10.0);
      e.semi_y = rng.uniform(6.0, 10.0);
      e.center = {rng.uniform(15.0, kCropSide - 16.0), rng.uniform(15.0, kCropSide - 16.0)};
      e.intensity = rng.uniform(0.25, 0.32);
      const bool clear = e.center.x + e.semi_x < keep_out.x0 || e.center.x - e.semi_x > keep_out.x1 ||
                         e.center.y + e.semi_y < keep_out.y0;
      if (clear) s.distractors.push_back(e);
    }
  }
  return s;
}

PhantomConfig make_clip_config(const PhantomSubject& s, Consistency consistency, Difficulty difficulty,
                               std::uint64_t seed) {
  static constexpr std::array<double, 5> kTransit = {0.75, 0.9, 1.0, 1.15, 1.3};
  static constexpr std::array<double, 5> kElongation = {2.0, 1.7, 1.45, 1.2, 1.0};
  const auto level = static_cast<std::size_t>(consistency);

  Rng rng(seed);
  PhantomConfig c;
  c.seed = Rng::splitmix(seed);
  c.spine = s.spine;
  c.vertebrae = s.vertebrae;
  c.roi = s.roi;
  c.airway = s.airway;
  c.background_level = s.background_level;
  c.texture = s.texture;
  c.distractors = s.distractors;

  const double area = rng.uniform(150.0, 210.0);
  c.bolus_semi_x = std::sqrt(area / kElongation[level]);
  c.bolus_semi_y = std::sqrt(area * kElongation[level]);
  if (difficulty == Difficulty::standard) {
    c.noise_sigma = 0.02;
    c.bolus_intensity = rng.uniform(0.12, 0.2);
  } else {
    c.noise_sigma = 0.05;
    c.bolus_intensity = rng.uniform(0.3, 0.38);
  }

  const int n_pre = 8 + static_cast<int>(rng.index(7));
  const int n_phase = static_cast<int>(std::lround(rng.uniform(12.0, 16.0) * kTransit[level]));
  const int n_post = 8 + static_cast<int>(rng.index(7));
  c.entry_frame = n_pre;
  c.exit_frame = n_pre + n_phase - 1;
  c.n_frames = n_pre + n_phase + n_post;

  const RectF& roi = s.roi;
  const double cx = 0.5 * (roi.x0 + roi.x1);
  const double sx = c.bolus_semi_x, sy = c.bolus_semi_y;
  const double bottom = kCropSide - 2.0 - sy;
  // Oral hold anterior to the ROI, transit down through it, esophageal tail below.
  c.path = {
      {0, {roi.x0 - rng.uniform(85.0, 100.0), roi.y0 + rng.uniform(20.0, 40.0)}},
      {c.entry_frame - 1, {roi.x0 - 22.0 - sx - rng.uniform(0.0, 10.0), roi.y0 + rng.uniform(0.0, 20.0)}},
      {c.entry_frame, {cx + rng.uniform(-5.0, 5.0), roi.y0 + rng.uniform(5.0, 15.0)}},
      {c.exit_frame, {cx + rng.uniform(-5.0, 5.0), roi.y1 - rng.uniform(5.0, 15.0)}},
      {c.exit_frame + 1, {cx + rng.uniform(0.0, 8.0), std::min(bottom, roi.y1 + sy + rng.uniform(18.0, 28.0))}},
      {c.n_frames - 1, {cx + rng.uniform(4.0, 12.0), std::min(bottom, roi.y1 + sy + rng.uniform(45.0, 60.0))}},
  };
  return c;
}

PhantomDatasetPaths generate_dataset(const fs::path& out_dir, const PhantomDatasetOptions& opt) {
  if (opt.n_subjects < 1 || opt.clips_per_subject < 1) throw DataError("phantom counts must be positive");
  io::ensure_directory(out_dir);

  struct Job {
    std::string clip_id;
    PhantomSubject const* subject = nullptr;
    Consistency consistency = Consistency::thin;
    std::uint64_t seed = 0;
  };
  std::vector<PhantomSubject> subjects;
  for (int s = 0; s < opt.n_subjects; ++s) subjects.push_back(make_subject(s, opt.difficulty, opt.seed));
  std::vector<Job> jobs;
  for (int s = 0; s < opt.n_subjects; ++s)
    for (int k = 0; k < opt.clips_per_subject; ++k) {
      const int idx = s * opt.clips_per_subject + k;
      jobs.push_back({subjects[s].subject_id + "_" + id_name('B', k, 2), &subjects[s],
                      kAllConsistencies[static_cast<std::size_t>(idx) % kAllConsistencies.size()],
                      Rng::derive(opt.seed, static_cast<std::uint64_t>(idx) + 1).next()});
    }

  std::vector<ClipManifestEntry> manifest(jobs.size());
  std::vector<ClipAnnotation> annotations(jobs.size());
  std::vector<std::vector<PhantomTruth>> truths(jobs.size());
  std::vector<std::string> errors(jobs.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      const Job& job = jobs[i];
      const PhantomConfig cfg = make_clip_config(*job.subject, job.consistency, opt.difficulty, job.seed);
      PhantomClip clip = generate_clip(cfg);
      const fs::path frame_dir = out_dir / "frames" / job.clip_id;
      const fs::path mask_dir = out_dir / "masks" / job.clip_id;
      io::ensure_directory(frame_dir);
      io::ensure_directory(mask_dir);
      for (int f = 0; f < cfg.n_frames; ++f) io::write_png(frame_dir / frame_name("frame", f), clip.frames[f]);
      for (const auto& [f, m] : clip.annotation.bolus_masks) {
        Gray8 png(m.rows(), m.cols());
        for (std::size_t p = 0; p < m.size(); ++p) png.pixels()[p] = m.pixels()[p] ? 255 : 0;
        io::write_png(mask_dir / frame_name("mask", f), png);
      }

      // Two simulated raters: mostly within two frames, occasionally further.
      Rng rr = Rng::derive(job.seed, 7);
      auto jitter = [&] {
        const int small = static_cast<int>(rr.index(5)) - 2;
        return rr.uniform() < 0.1 ? small + (small >= 0 ? 3 : -3) : small;
      };
      auto clamp_frame = [&](int v) { return std::clamp(v, 0, cfg.n_frames - 1); };
      ClipAnnotation a;
      a.clip_id = job.clip_id;
      a.bpm_frame = cfg.entry_frame;
      a.uesc_frame = cfg.exit_frame;
      a.rater_a_bpm = clamp_frame(a.bpm_frame + jitter());
      a.rater_a_uesc = clamp_frame(a.uesc_frame + jitter());
      a.rater_b_bpm = clamp_frame(a.bpm_frame + jitter());
      a.rater_b_uesc = clamp_frame(a.uesc_frame + jitter());
      annotations[i] = std::move(a);

      manifest[i] = {job.clip_id, job.subject->subject_id, job.consistency, fs::path("frames") / job.clip_id,
                     cfg.n_frames, cfg.fps};
      truths[i] = std::move(clip.truth);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (!errors[i].empty()) throw DataError("phantom clip " + jobs[i].clip_id + ": " + errors[i]);

  PhantomDatasetPaths paths{out_dir / "manifest.csv", out_dir / "annotations.csv", out_dir / "landmarks.csv",
                            out_dir / "truth.csv"};
  save_manifest(paths.manifest, manifest);
  save_annotations(paths.annotations, annotations);
  LandmarkTable lt;
  for (const auto& j : jobs) lt.set(j.clip_id, std::nullopt, j.subject->spine);
  lt.save(paths.landmarks);

  std::ofstream out(paths.truth);
  if (!out) throw Error("cannot write " + paths.truth.string());
  out << "clip_id,frame,cx,cy,x_min,y_min,x_max,y_max\n";
  for (std::size_t i = 0; i < jobs.size(); ++i)
    for (std::size_t f = 0; f < truths[i].size(); ++f) {
      const auto& t = truths[i][f];
      out << jobs[i].clip_id << ',' << f << ',' << io::format_fixed(t.center.x, 4) << ','
          << io::format_fixed(t.center.y, 4) << ',' << t.bbox.x_min << ',' << t.bbox.y_min << ',' << t.bbox.x_max
          << ',' << t.bbox.y_max << '\n';
    }
  return paths;
}

std::map<std::string, std::vector<PhantomTruth>> load_truth(const fs::path& path) {
  const io::CsvTable t = io::read_csv(path);
  const int c_id = t.require_column("clip_id", path), c_f = t.require_column("frame", path);
  const int c_x = t.require_column("cx", path), c_y = t.require_column("cy", path);
  const int c_x0 = t.require_column("x_min", path), c_y0 = t.require_column("y_min", path);
  const int c_x1 = t.require_column("x_max", path), c_y1 = t.require_column("y_max", path);
  std::map<std::string, std::vector<PhantomTruth>> out;
  for (const auto& row : t.rows) {
    auto& v = out[row[c_id]];
    const int f = io::parse_int(row[c_f], "frame");
    if (f != static_cast<int>(v.size()))
      throw DataError(path.string() + ": frames of clip " + row[c_id] + " must be listed in order from 0");
    PhantomTruth pt;
    pt.center = {io::parse_double(row[c_x], "cx"), io::parse_double(row[c_y], "cy")};
    pt.centroid = pt.center;
    pt.bbox = {io::parse_int(row[c_x0], "x_min"), io::parse_int(row[c_y0], "y_min"), io::parse_int(row[c_x1], "x_max"),
               io::parse_int(row[c_y1], "y_max")};
    v.push_back(pt);
  }
  return out;
}

}  // namespace vfss
