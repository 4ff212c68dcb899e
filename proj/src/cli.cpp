#include "vfss/cli.hpp"

#include <CLI11.hpp>
#include <opencv2/core/version.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "vfss/cam.hpp"
#include "vfss/error.hpp"
#include "vfss/phantom.hpp"
#include "vfss/pipeline.hpp"
#include "vfss/report.hpp"
#include "vfss/settings.hpp"

namespace vfss {

namespace {

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::map<std::string, std::string> cli;  // flag-derived settings
};

struct Options {
  std::string manifest, annotations, landmarks, split, subset = "test";
  std::string clip, clip_id, out, out_dir, ckpt, probs, probs_dir, events, bolus_dir, truth, masks_dir, backbone;
  std::string ratios, frames = "all", difficulty = "standard";
  std::vector<std::string> inputs;
  int subjects = 40, clips_per_subject = 2;
};

class Context {
 public:
  Context(std::string command, const std::vector<std::string>& args, Settings settings, std::ostream& out)
      : command_(std::move(command)), args_(args), settings_(std::move(settings)), out_(out) {}

  const Settings& settings() const { return settings_; }
  std::ostream& out() { return out_; }
  int workers() const { return std::max(1, settings_.get_int("workers")); }

  /// Provenance record: tool/version, command line, seed and every setting
  /// with its source.
  void write_provenance(const fs::path& path) const {
    if (path.has_parent_path()) io::ensure_directory(path.parent_path());
    std::ofstream p(path);
    if (!p) throw Error("cannot write " + path.string());
    p << "tool=vfss " << kVersion << '\n';
    p << "command=" << command_ << '\n';
    p << "args=";
    for (std::size_t i = 0; i < args_.size(); ++i) p << (i ? " " : "") << args_[i];
    p << '\n';
    p << "seed=" << settings_.get("seed") << '\n';
    p << "compiler=" << __VERSION__ << '\n';
    p << "opencv=" << CV_VERSION << '\n';
    p << "[settings]\n" << settings_.snapshot();
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  Settings settings_;
  std::ostream& out_;
};

fs::path require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  return value;
}

/// Provenance file for a single-file output: <out>.provenance.txt.
fs::path provenance_for_file(const fs::path& out) {
  fs::path p = out;
  p += ".provenance.txt";
  return p;
}

struct Target {
  std::string clip_id;
  fs::path path;
  Consistency consistency = Consistency::thin;
};

/// Single clip (--clip) or a manifest subset (--manifest --split --subset).
std::vector<Target> resolve_targets(const Options& o, bool& batch) {
  if (!o.clip.empty()) {
    batch = false;
    const fs::path p(o.clip);
    return {{o.clip_id.empty() ? p.filename().string() : o.clip_id, p}};
  }
  batch = true;
  if (o.manifest.empty() || o.split.empty())
    throw UsageError("give either --clip or --manifest together with --split");
  const auto manifest = load_manifest(o.manifest);
  std::vector<Target> out;
  for (const auto& e : select_subset(manifest, load_split(o.split), parse_subset(o.subset)))
    out.push_back({e.clip_id, e.path, e.consistency});
  return out;
}

struct LoadedModel {
  std::unique_ptr<PhaseClassifier> model;
  ClaheParams clahe;
};

LoadedModel load_model(const Context& ctx, const fs::path& ckpt) {
  const std::string arch = ctx.settings().get("arch");
  LoadedModel lm;
  if (arch.rfind("plugin:", 0) == 0) {
    const std::string name = arch.substr(7);
    const PluginBackend* b = find_plugin(name);
    if (!b) throw UsageError("no backbone plugin named '" + name + "' is registered");
    lm.model = b->load(ckpt);
    lm.clahe = ctx.settings().clahe();
    return lm;
  }
  ModelCheckpoint c = load_checkpoint(ckpt);
  lm.clahe = c.clahe;
  lm.model = std::make_unique<Cnn>(std::move(c.model));
  return lm;
}

// ------------------------------------------------------------ commands

void cmd_ingest(Context& ctx, const Options& o) {
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  const auto manifest = load_manifest(require_path(o.manifest, "--manifest"));
  io::ensure_directory(out_dir);
  std::map<std::string, ClipAnnotation> ann;
  std::vector<ClipAnnotation> annotations;
  if (!o.annotations.empty()) {
    annotations = load_annotations(o.annotations);
    validate_annotations(annotations, manifest);
    ann = index_annotations(annotations);
  }
  if (!o.landmarks.empty()) {
    const LandmarkTable lt = LandmarkTable::load(o.landmarks);
    for (const auto& e : manifest)
      if (!lt.find(e.clip_id, 0)) throw DataError("no spine landmarks for clip '" + e.clip_id + "'");
  }
  std::ofstream s(out_dir / "ingest_summary.csv");
  if (!s) throw Error("cannot write " + (out_dir / "ingest_summary.csv").string());
  s << "clip_id,subject_id,consistency,n_frames,bpm,uesc,n_phase\n";
  for (const auto& e : manifest) {
    s << e.clip_id << ',' << e.subject_id << ',' << to_string(e.consistency) << ',' << e.n_frames << ',';
    if (auto it = ann.find(e.clip_id); it != ann.end())
      s << it->second.bpm_frame << ',' << it->second.uesc_frame << ','
        << it->second.uesc_frame - it->second.bpm_frame + 1 << '\n';
    else
      s << ",,\n";
  }
  if (!annotations.empty()) {
    const InterraterReport ir = interrater(annotations, ctx.settings().get_int("p3_tolerance"));
    if (ir.n > 0) {
      std::ofstream t(out_dir / "interrater.txt");
      t << "clips=" << ir.n << '\n';
      t << "BPM   " << (ir.bpm ? format_agreement(*ir.bpm) : std::string("undefined")) << '\n';
      t << "UESC  " << (ir.uesc ? format_agreement(*ir.uesc) : std::string("undefined")) << '\n';
    }
  }
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << "ingested " << manifest.size() << " clips\n";
}

void cmd_split(Context& ctx, const Options& o) {
  const fs::path out = require_path(o.out, "--out");
  const auto manifest = load_manifest(require_path(o.manifest, "--manifest"), false);
  const DatasetSplit split = subject_split(manifest, ctx.settings().split_ratios(), ctx.settings().get_u64("seed"));
  if (out.has_parent_path()) io::ensure_directory(out.parent_path());
  save_split(out, split);
  ctx.write_provenance(provenance_for_file(out));
  ctx.out() << "split: " << split.train_clips.size() << " train, " << split.val_clips.size() << " val, "
            << split.test_clips.size() << " test clips\n";
}

void cmd_train(Context& ctx, const Options& o) {
  const fs::path ckpt_dir = require_path(o.ckpt, "--ckpt");
  const auto manifest = load_manifest(require_path(o.manifest, "--manifest"));
  const auto annotations = load_annotations(require_path(o.annotations, "--annotations"));
  validate_annotations(annotations, manifest);
  const auto ann = index_annotations(annotations);
  const DatasetSplit split = load_split(require_path(o.split, "--split"));
  const Settings& s = ctx.settings();
  const CnnSpec spec = s.cnn_spec();
  const TrainConfig tc = s.train_config();
  const ClaheParams clahe = s.clahe();

  const LabeledFrames train_set =
      gather_frames(select_subset(manifest, split, Subset::train), ann, clahe, spec.input_side, ctx.workers());
  const LabeledFrames val_set =
      gather_frames(select_subset(manifest, split, Subset::val), ann, clahe, spec.input_side, ctx.workers());
  ctx.out() << "training " << spec.arch_name() << " (side " << spec.input_side << ") on " << train_set.inputs.size()
            << " frames, validating on " << val_set.inputs.size() << '\n';

  ModelCheckpoint ckpt = train(build_cnn(spec, tc.seed), train_set, val_set, tc, [&](const EpochRecord& r) {
    ctx.out() << "epoch " << r.epoch + 1 << '/' << tc.epochs << " lr " << io::format_fixed(r.learning_rate, 6)
              << " loss " << io::format_fixed(r.train_loss, 4) << " acc " << io::format_fixed(r.train_accuracy, 4);
    if (r.val_loss) ctx.out() << " val_loss " << io::format_fixed(*r.val_loss, 4) << " val_acc "
                              << io::format_fixed(*r.val_accuracy, 4);
    ctx.out() << std::endl;
  });
  ckpt.clahe = clahe;
  ckpt.config_hash = config_hash(spec, tc, clahe);
  save_checkpoint(ckpt, ckpt_dir);
  ctx.write_provenance(ckpt_dir / "provenance.txt");
}

void cmd_predict(Context& ctx, const Options& o) {
  const LoadedModel lm = load_model(ctx, require_path(o.ckpt, "--ckpt"));
  bool batch = false;
  const auto targets = resolve_targets(o, batch);
  fs::path single_out;
  if (batch) io::ensure_directory(require_path(o.out_dir, "--out-dir"));
  else single_out = require_path(o.out, "--out");
  parallel_for(targets.size(), ctx.workers(), [&](std::size_t i) {
    const PreparedClip clip = prepare_clip(targets[i].path, lm.clahe, lm.model->input_side(), false);
    const ClipPrediction pred = predict_clip(*lm.model, clip.net);
    fs::path path = single_out;
    if (batch) {
      io::ensure_directory(fs::path(o.out_dir) / targets[i].clip_id);
      path = fs::path(o.out_dir) / targets[i].clip_id / "probs.csv";
    } else if (path.has_parent_path()) {
      io::ensure_directory(path.parent_path());
    }
    write_probs(path, pred);
  });
  ctx.write_provenance(batch ? fs::path(o.out_dir) / "provenance.txt" : provenance_for_file(single_out));
  ctx.out() << "predicted " << targets.size() << " clip(s)\n";
}

void cmd_decode(Context& ctx, const Options& o) {
  const fs::path out = require_path(o.out, "--out");
  std::vector<EventRow> rows;
  if (!o.probs.empty()) {
    const fs::path p(o.probs);
    const std::string id = !o.clip_id.empty() ? o.clip_id : p.parent_path().filename().string();
    rows.push_back({id, decode(read_probs(p).labels)});
  } else {
    const fs::path dir = require_path(o.probs_dir, "--probs or --probs-dir");
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> clips;
    for (const auto& d : fs::directory_iterator(dir))
      if (d.is_directory() && fs::exists(d.path() / "probs.csv")) clips.push_back(d.path());
    std::sort(clips.begin(), clips.end());
    if (clips.empty()) throw DataError("no <clip>/probs.csv files under " + dir.string());
    for (const auto& c : clips) rows.push_back({c.filename().string(), decode(read_probs(c / "probs.csv").labels)});
  }
  if (out.has_parent_path()) io::ensure_directory(out.parent_path());
  write_events(out, rows);
  ctx.write_provenance(provenance_for_file(out));
  ctx.out() << "decoded " << rows.size() << " clip(s)\n";
}

std::vector<int> parse_frame_range(const std::string& spec, int n) {
  std::vector<int> out;
  if (spec == "all") {
    for (int f = 0; f < n; ++f) out.push_back(f);
    return out;
  }
  const auto dash = spec.find('-');
  if (dash == std::string::npos) throw UsageError("--frames expects all, annotated or A-B");
  const int a = io::parse_int(spec.substr(0, dash), "first frame");
  const int b = io::parse_int(spec.substr(dash + 1), "last frame");
  if (a < 0 || b < a || b >= n) throw UsageError("--frames range outside the clip");
  for (int f = a; f <= b; ++f) out.push_back(f);
  return out;
}

void cmd_cam(Context& ctx, const Options& o) {
  const LoadedModel lm = load_model(ctx, require_path(o.ckpt, "--ckpt"));
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  bool batch = false;
  const auto targets = resolve_targets(o, batch);
  parallel_for(targets.size(), ctx.workers(), [&](std::size_t i) {
    const PreparedClip clip = prepare_clip(targets[i].path, lm.clahe, lm.model->input_side(), false);
    const fs::path dir = batch ? out_dir / targets[i].clip_id : out_dir;
    io::ensure_directory(dir);
    std::ofstream side(dir / "cam.csv");
    if (!side) throw Error("cannot write " + (dir / "cam.csv").string());
    side << "frame,target_class,max_raw_value,positive_fraction\n";
    for (int f : parse_frame_range(o.frames, static_cast<int>(clip.net.size()))) {
      const ActivationMap raw = grad_cam(*lm.model, clip.net[f]);
      const ImageF map = upsample_map(raw, kCropSide).values;
      Gray8 png(map.rows(), map.cols());
      for (std::size_t k = 0; k < png.size(); ++k)
        png.pixels()[k] = static_cast<std::uint8_t>(std::lround(std::clamp(map.pixels()[k], 0.0f, 1.0f) * 255.0f));
      io::write_png(dir / format_frame_file("cam", f), png);
      side << f << ',' << (raw.target_class == Phase::P ? 'P' : 'N') << ',' << io::format_double(raw.max_raw_value)
           << ',' << io::format_double(raw.positive_fraction) << '\n';
    }
  });
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << "wrote activation maps for " << targets.size() << " clip(s)\n";
}

void cmd_localize(Context& ctx, const Options& o) {
  const LoadedModel lm = load_model(ctx, require_path(o.ckpt, "--ckpt"));
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  bool batch = false;
  const auto targets = resolve_targets(o, batch);
  std::map<std::string, ClipAnnotation> ann;
  if (!o.annotations.empty()) ann = index_annotations(load_annotations(o.annotations));
  if (o.frames == "annotated" && ann.empty()) throw UsageError("--frames annotated needs --annotations");
  const RefineConfig refine = ctx.settings().refine_config();
  const bool overlays = ctx.settings().get_bool("overlays");

  parallel_for(targets.size(), ctx.workers(), [&](std::size_t i) {
    const Target& t = targets[i];
    const PreparedClip clip = prepare_clip(t.path, lm.clahe, lm.model->input_side(), true);
    const int n = static_cast<int>(clip.net.size());
    LocalizeOptions opt;
    opt.refine = refine;
    if (o.frames == "annotated") {
      const auto it = ann.find(t.clip_id);
      if (it == ann.end()) throw DataError("no annotation for clip '" + t.clip_id + "'");
      for (int f = it->second.bpm_frame; f <= it->second.uesc_frame; ++f) opt.frames.push_back(f);
    } else {
      opt.frames = parse_frame_range(o.frames, n);
    }
    const fs::path dir = batch ? out_dir / t.clip_id : out_dir;
    opt.image_dir = dir;
    opt.overlays = overlays;
    std::map<int, Mask> truth;
    if (!o.masks_dir.empty() && overlays) {
      const fs::path mdir = fs::path(o.masks_dir) / t.clip_id;
      if (fs::is_directory(mdir))
        for (const auto& file : io::list_frame_files(mdir)) {
          const std::string stem = file.stem().string();
          truth[io::parse_int(stem.substr(stem.find_last_of('_') + 1), "mask frame")] = read_mask(file);
        }
      opt.truth_masks = &truth;
    }
    write_bolus(dir / "bolus.csv", localize_clip(*lm.model, clip, opt));
  });
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << "localized " << targets.size() << " clip(s)\n";
}

std::string backbone_name(const Options& o) { return o.backbone.empty() ? std::string("model") : o.backbone; }

void cmd_eval_phase(Context& ctx, const Options& o) {
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  const fs::path probs_dir = require_path(o.probs_dir, "--probs-dir");
  const auto manifest = load_manifest(require_path(o.manifest, "--manifest"), false);
  const auto annotations = load_annotations(require_path(o.annotations, "--annotations"));
  validate_annotations(annotations, manifest);
  const auto clips = select_subset(manifest, load_split(require_path(o.split, "--split")), parse_subset(o.subset));

  std::map<std::string, PhaseSequence> labels;
  for (const auto& e : clips) {
    const auto pred = read_probs(probs_dir / e.clip_id / "probs.csv");
    if (static_cast<int>(pred.labels.size()) != e.n_frames)
      throw DataError("probs.csv of clip '" + e.clip_id + "' has " + std::to_string(pred.labels.size()) +
                      " frames, manifest says " + std::to_string(e.n_frames));
    labels[e.clip_id] = pred.labels;
  }
  std::map<std::string, PhaseDetection> events;
  if (!o.events.empty()) {
    for (const auto& r : read_events(o.events)) events[r.clip_id] = r.detection;
  } else {
    for (const auto& [id, seq] : labels) events[id] = decode(seq);
  }
  const std::string backbone = backbone_name(o);
  const PhaseEvaluation ev = evaluate_phase(backbone, clips, index_annotations(annotations), labels, events,
                                            ctx.settings().get_int("p3_tolerance"));
  io::ensure_directory(out_dir);
  write_phase_table(out_dir / "phase_table.csv", {ev.overall});
  write_phase_by_consistency(out_dir / "phase_by_consistency.csv", ev.by_consistency);
  write_phase_clips(out_dir / "phase_clips.csv", ev.clips);
  const std::string text = phase_text_table({ev.overall}, ev.by_consistency);
  std::ofstream(out_dir / "phase_table.txt") << text;
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << text;
}

void cmd_eval_localize(Context& ctx, const Options& o) {
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  const fs::path bolus_dir = require_path(o.bolus_dir, "--bolus-dir");
  const auto manifest = load_manifest(require_path(o.manifest, "--manifest"), false);
  const auto annotations = load_annotations(require_path(o.annotations, "--annotations"));
  validate_annotations(annotations, manifest);
  const LandmarkTable landmarks = LandmarkTable::load(require_path(o.landmarks, "--landmarks"));
  const auto clips = select_subset(manifest, load_split(require_path(o.split, "--split")), parse_subset(o.subset));

  std::map<std::string, std::map<int, GroundTruthFrame>> truth;
  if (!o.truth.empty()) truth = truth_from_csv(o.truth);
  else if (!o.masks_dir.empty())
    for (const auto& e : clips) truth[e.clip_id] = truth_from_masks(o.masks_dir, e.clip_id);
  else throw UsageError("give --truth or --masks-dir");

  std::map<std::string, std::vector<BolusRow>> preds;
  for (const auto& e : clips) preds[e.clip_id] = read_bolus(bolus_dir / e.clip_id / "bolus.csv");
  const std::string backbone = backbone_name(o);
  const LocalizationEvaluation ev = evaluate_localization(backbone, clips, index_annotations(annotations), landmarks,
                                                          truth, preds, ctx.settings().iou_thresholds());
  io::ensure_directory(out_dir);
  write_localization_table(out_dir / "localization_table.csv", {ev.overall});
  write_localization_by_consistency(out_dir / "localization_by_consistency.csv", ev.by_consistency);
  write_localization_frames(out_dir / "localization_frames.csv", ev.frames);
  write_sweep(out_dir / "f1_sweep.csv", backbone, ev.sweep);
  const std::string text = localization_text_table({ev.overall}, ev.by_consistency, std::nullopt, {backbone});
  std::ofstream(out_dir / "localization_table.txt") << text;
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << text;
}

void cmd_phantom(Context& ctx, const Options& o) {
  PhantomDatasetOptions opt;
  opt.n_subjects = o.subjects;
  opt.clips_per_subject = o.clips_per_subject;
  opt.difficulty = parse_difficulty(o.difficulty);
  opt.seed = ctx.settings().get_u64("seed");
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  generate_dataset(out_dir, opt);
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << "wrote " << opt.n_subjects * opt.clips_per_subject << " phantom clips to " << out_dir.string() << '\n';
}

void cmd_report(Context& ctx, const Options& o) {
  const fs::path out_dir = require_path(o.out_dir, "--out-dir");
  if (o.inputs.empty()) throw UsageError("--inputs needs at least one evaluation directory");
  std::vector<PhaseRow> phase, phase_c;
  std::vector<LocalizationRow> loc, loc_c;
  std::vector<SweepRow> sweep;
  std::vector<std::string> backbones;
  std::vector<std::vector<LocalizationFrame>> frames;
  for (const auto& in : o.inputs) {
    const fs::path d(in);
    bool any = false;
    if (fs::exists(d / "phase_table.csv")) {
      any = true;
      for (auto& r : read_phase_table(d / "phase_table.csv")) phase.push_back(r);
      for (auto& r : read_phase_by_consistency(d / "phase_by_consistency.csv")) phase_c.push_back(r);
    }
    if (fs::exists(d / "localization_table.csv")) {
      any = true;
      const auto rows = read_localization_table(d / "localization_table.csv");
      for (const auto& r : rows) {
        loc.push_back(r);
        backbones.push_back(r.backbone);
      }
      for (auto& r : read_localization_by_consistency(d / "localization_by_consistency.csv")) loc_c.push_back(r);
      for (auto& r : read_sweep(d / "f1_sweep.csv")) sweep.push_back(r);
      frames.push_back(read_localization_frames(d / "localization_frames.csv"));
    }
    if (!any) throw DataError("no evaluation tables in " + d.string());
  }
  // Group per-consistency rows by level, backbones in input order.
  auto by_level = [](auto rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return static_cast<int>(parse_consistency(a.consistency)) < static_cast<int>(parse_consistency(b.consistency));
    });
    return rows;
  };
  io::ensure_directory(out_dir);
  std::string text;
  if (!phase.empty()) {
    phase_c = by_level(phase_c);
    write_phase_table(out_dir / "phase_table.csv", phase);
    write_phase_by_consistency(out_dir / "phase_by_consistency.csv", phase_c);
    text += phase_text_table(phase, phase_c) + '\n';
  }
  if (!loc.empty()) {
    loc_c = by_level(loc_c);
    write_localization_table(out_dir / "localization_table.csv", loc);
    write_localization_by_consistency(out_dir / "localization_by_consistency.csv", loc_c);
    std::ofstream sw(out_dir / "f1_sweep.csv");
    sw << "backbone,threshold,f1\n";
    for (const auto& r : sweep) sw << r.backbone << ',' << io::format_fixed(r.threshold, 2) << ',' << io::format_fixed(r.f1, 4) << '\n';
    const auto fr = compare_backbones(backbones, frames);
    std::ofstream f(out_dir / "friedman.txt");
    if (fr) {
      f << format_friedman(*fr) << '\n';
      f << "mean_ranks";
      for (std::size_t i = 0; i < backbones.size(); ++i) f << ' ' << backbones[i] << '=' << io::format_fixed(fr->mean_ranks[i], 3);
      f << '\n';
    } else {
      f << "not applicable: needs at least two backbones with common detected frames\n";
    }
    text += localization_text_table(loc, loc_c, fr, backbones) + '\n';
  }
  if (!o.annotations.empty()) {
    const InterraterReport ir = interrater(load_annotations(o.annotations), ctx.settings().get_int("p3_tolerance"));
    std::string t = "Inter-rater agreement (" + std::to_string(ir.n) + " clips)\n";
    t += "BPM   " + (ir.bpm ? format_agreement(*ir.bpm) : std::string("undefined")) + '\n';
    t += "UESC  " + (ir.uesc ? format_agreement(*ir.uesc) : std::string("undefined")) + '\n';
    std::ofstream(out_dir / "interrater.txt") << t;
    text += t;
  }
  std::ofstream(out_dir / "report.txt") << text;
  ctx.write_provenance(out_dir / "provenance.txt");
  ctx.out() << text;
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"VFSS pharyngeal-phase detection and bolus localization toolkit", "vfss"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  Options o;
  std::string seed, workers, arch, net_side, epochs, batch, lr, lr_decay, clahe_clip, clahe_tiles;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key=value configuration file");
    sub->add_option("--set", common.set, "override one setting (key=value); repeatable");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--workers", workers, "clips processed in parallel");
  };
  auto add_targets = [&](CLI::App* sub) {
    sub->add_option("--clip", o.clip, "clip directory or video file");
    sub->add_option("--clip-id", o.clip_id, "identifier for --clip (default: its file name)");
    sub->add_option("--manifest", o.manifest, "manifest CSV (batch mode)");
    sub->add_option("--split", o.split, "split CSV (batch mode)");
    sub->add_option("--subset", o.subset, "train, val or test (batch mode)");
  };

  auto* ingest = app.add_subcommand("ingest", "validate manifest, annotations and landmarks");
  add_common(ingest);
  ingest->add_option("--manifest", o.manifest)->required();
  ingest->add_option("--annotations", o.annotations);
  ingest->add_option("--landmarks", o.landmarks);
  ingest->add_option("--out-dir", o.out_dir)->required();

  auto* split = app.add_subcommand("split", "subject-wise train/val/test split");
  add_common(split);
  split->add_option("--manifest", o.manifest)->required();
  split->add_option("--ratios", o.ratios, "train,val,test fractions");
  split->add_option("--out", o.out)->required();

  auto* trn = app.add_subcommand("train", "train a frame classifier");
  add_common(trn);
  trn->add_option("--manifest", o.manifest)->required();
  trn->add_option("--annotations", o.annotations)->required();
  trn->add_option("--split", o.split)->required();
  trn->add_option("--out,--ckpt", o.ckpt, "output checkpoint directory")->required();
  trn->add_option("--arch", arch, "cnn3 or cnn4");
  trn->add_option("--net-size,--net-side", net_side, "network input side");
  trn->add_option("--epochs", epochs);
  trn->add_option("--batch", batch);
  trn->add_option("--lr", lr, "initial learning rate");
  trn->add_option("--lr-decay-factor", lr_decay, "multiplier applied every lr_decay_period epochs");
  trn->add_option("--clahe-clip", clahe_clip, "CLAHE clip limit");
  trn->add_option("--clahe-tiles", clahe_tiles, "CLAHE tiles per side");

  auto* predict = app.add_subcommand("predict", "per-frame P/N probabilities");
  add_common(predict);
  add_targets(predict);
  predict->add_option("--ckpt", o.ckpt)->required();
  predict->add_option("--arch", arch, "plugin:<name> for external backbones");
  predict->add_option("--out", o.out, "probs.csv (single clip)");
  predict->add_option("--out-dir", o.out_dir, "output directory (batch mode)");

  auto* dec = app.add_subcommand("decode", "BPM/UESC events from per-frame labels");
  add_common(dec);
  dec->add_option("--probs", o.probs);
  dec->add_option("--probs-dir", o.probs_dir);
  dec->add_option("--clip-id", o.clip_id);
  dec->add_option("--out", o.out)->required();

  auto* cam = app.add_subcommand("cam", "Grad-CAM activation maps");
  add_common(cam);
  add_targets(cam);
  cam->add_option("--ckpt", o.ckpt)->required();
  cam->add_option("--arch", arch);
  cam->add_option("--out-dir", o.out_dir)->required();
  cam->add_option("--frames", o.frames, "all or A-B");

  auto* loc = app.add_subcommand("localize", "weakly-supervised bolus localization");
  add_common(loc);
  add_targets(loc);
  loc->add_option("--ckpt", o.ckpt)->required();
  loc->add_option("--arch", arch);
  loc->add_option("--out-dir", o.out_dir)->required();
  loc->add_option("--annotations", o.annotations);
  loc->add_option("--frames", o.frames, "all, annotated or A-B");
  loc->add_option("--masks-dir", o.masks_dir, "ground-truth masks drawn on overlays");

  auto* evp = app.add_subcommand("eval-phase", "phase detection metrics");
  add_common(evp);
  evp->add_option("--manifest", o.manifest)->required();
  evp->add_option("--annotations", o.annotations)->required();
  evp->add_option("--split", o.split)->required();
  evp->add_option("--subset", o.subset);
  evp->add_option("--probs-dir", o.probs_dir)->required();
  evp->add_option("--events", o.events, "events.csv (default: decode the labels)");
  evp->add_option("--backbone", o.backbone);
  evp->add_option("--out-dir", o.out_dir)->required();

  auto* evl = app.add_subcommand("eval-localize", "bolus localization metrics");
  add_common(evl);
  evl->add_option("--manifest", o.manifest)->required();
  evl->add_option("--annotations", o.annotations)->required();
  evl->add_option("--landmarks", o.landmarks)->required();
  evl->add_option("--split", o.split)->required();
  evl->add_option("--subset", o.subset);
  evl->add_option("--bolus-dir", o.bolus_dir)->required();
  evl->add_option("--truth", o.truth, "truth CSV");
  evl->add_option("--masks-dir", o.masks_dir, "mask PNGs <dir>/<clip_id>/mask_NNNN.png");
  evl->add_option("--backbone", o.backbone);
  evl->add_option("--out-dir", o.out_dir)->required();

  auto* ph = app.add_subcommand("phantom", "generate a synthetic dataset");
  add_common(ph);
  ph->add_option("--out-dir", o.out_dir)->required();
  ph->add_option("--subjects", o.subjects)->check(CLI::PositiveNumber);
  ph->add_option("--clips-per-subject", o.clips_per_subject)->check(CLI::PositiveNumber);
  ph->add_option("--difficulty", o.difficulty)->check(CLI::IsMember({"standard", "hard"}));

  auto* rep = app.add_subcommand("report", "merge evaluation outputs into report tables");
  add_common(rep);
  rep->add_option("--inputs", o.inputs, "evaluation output directories")->delimiter(',')->required();
  rep->add_option("--annotations", o.annotations, "annotations with rater columns");
  rep->add_option("--out-dir", o.out_dir)->required();

  if (!args.empty() && !args[0].empty() && args[0][0] != '-' && !app.get_subcommand_no_throw(args[0])) {
    err << "vfss: unknown subcommand '" << args[0] << "'\n" << app.help();
    return 1;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "vfss: " << e.what() << '\n' << app.help();
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    auto& cli = common.cli;
    if (!seed.empty()) cli["seed"] = seed;
    if (!workers.empty()) cli["workers"] = workers;
    if (!arch.empty()) cli["arch"] = arch;
    if (!net_side.empty()) cli["net_side"] = net_side;
    if (!epochs.empty()) cli["epochs"] = epochs;
    if (!batch.empty()) cli["batch_size"] = batch;
    if (!lr.empty()) cli["learning_rate"] = lr;
    if (!lr_decay.empty()) cli["lr_decay_factor"] = lr_decay;
    if (!clahe_clip.empty()) cli["clahe_clip_limit"] = clahe_clip;
    if (!clahe_tiles.empty()) cli["clahe_tiles"] = clahe_tiles;
    if (!o.ratios.empty()) {
      const auto f = io::split_fields(o.ratios);
      if (f.size() != 3) throw UsageError("--ratios expects three comma-separated fractions");
      cli["split_train"] = f[0];
      cli["split_val"] = f[1];
      cli["split_test"] = f[2];
    }
    for (const auto& kv : common.set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      cli[io::trim(kv.substr(0, eq))] = kv.substr(eq + 1);
    }
    Context ctx(sub->get_name(), args, resolve_settings(common.config, cli), out);
    const std::string& name = sub->get_name();
    if (name == "ingest") cmd_ingest(ctx, o);
    else if (name == "split") cmd_split(ctx, o);
    else if (name == "train") cmd_train(ctx, o);
    else if (name == "predict") cmd_predict(ctx, o);
    else if (name == "decode") cmd_decode(ctx, o);
    else if (name == "cam") cmd_cam(ctx, o);
    else if (name == "localize") cmd_localize(ctx, o);
    else if (name == "eval-phase") cmd_eval_phase(ctx, o);
    else if (name == "eval-localize") cmd_eval_localize(ctx, o);
    else if (name == "phantom") cmd_phantom(ctx, o);
    else if (name == "report") cmd_report(ctx, o);
    return 0;
  } catch (const UsageError& e) {
    err << "vfss " << sub->get_name() << ": usage error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "vfss " << sub->get_name() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "vfss " << sub->get_name() << ": internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace vfss
