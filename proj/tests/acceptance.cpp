// Acceptance run: one PASS/FAIL line per criterion. Criteria 6-8 train the
// CNN4 fast profile twice on a phantom dataset and take about half an hour on
// one CPU core. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "vfss/cli.hpp"
#include "vfss/data.hpp"
#include "vfss/decoder.hpp"
#include "vfss/geometry.hpp"
#include "vfss/io.hpp"
#include "vfss/metrics.hpp"

namespace {

using namespace vfss;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) { return io::format_fixed(v, digits); }
std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ------------------------------------------------------------- 1 to 5

Outcome decoder_oracle() {
  const auto t0 = Clock::now();
  long mismatches = 0, checked = 0;
  for (int n = 1; n <= 12; ++n)
    for (unsigned code = 0; code < (1u << n); ++code) {
      const PhaseSequence s = test::sequence_from_bits(code, n);
      mismatches += !(decode(s) == test::decode_oracle(s));
      ++checked;
    }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          std::to_string(checked) + " sequences, " + std::to_string(mismatches) + " mismatches, " + fmt(t, 2) + " s"};
}

Outcome gradcam_check() {
  const auto t0 = Clock::now();
  test::Gen g(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const BasicCnn<double> m = test::toy_network(static_cast<std::uint64_t>(trial));
    const ImageF x = g.image(8, 8);
    worst = std::max({worst, test::gradcam_weight_error(m, x, Phase::P), test::gradcam_weight_error(m, x, Phase::N)});
  }
  const double t = seconds_since(t0);
  return {worst < 1e-3 && t < 60.0, "worst relative error " + sci(worst) + ", " + fmt(t, 2) + " s"};
}

Outcome gac_disk() {
  const auto t0 = Clock::now();
  const double iou = test::gac_disk_iou(100);
  const double t = seconds_since(t0);
  return {iou >= 0.9 && t < 5.0, "IoU " + fmt(iou, 4) + ", " + fmt(t, 2) + " s"};
}

Outcome metric_identities() {
  std::vector<std::string> failed;
  auto check = [&](const std::string& name, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) failed.push_back(name + " got " + std::to_string(got));
  };
  constexpr double kRational = 1e-9, kReal = 1e-6;
  const auto gt = parse_phases("NNPPPPNN");
  check("f1 perfect", f1_frames(gt, gt), 1.0, kRational);
  check("f1 all N", f1_frames(parse_phases("NNNNNNNN"), gt), 0.0, kRational);
  check("f1 hand", f1_frames(parse_phases("NPPPNNNN"), gt), 4.0 / 7.0, kRational);
  {
    const std::vector<std::optional<int>> exact{3, 7, 11}, off{10, 12, 14}, missing{1, std::nullopt, 3, 4};
    const std::vector<int> g1{3, 7, 11}, g2{10, 10, 10}, g3{1, 2, 3, 4};
    check("p3 exact", p3(exact, g1), 100.0, kRational);
    check("p3 0/2/4", p3(off, g2), 200.0 / 3.0, kRational);
    check("p3 missing", p3(missing, g3), 75.0, kRational);
  }
  {
    const std::vector<double> a{1, 4, 2, 8, 5}, neg{-1, -4, -2, -8, -5}, x{1, 2, 3}, y{1, 2, 4};
    check("r identity", pearson_r(a, a), 1.0, kReal);
    check("r negation", pearson_r(a, neg), -1.0, kReal);
    check("r hand", pearson_r(x, y), 3.0 / std::sqrt(28.0 / 3.0), kReal);
  }
  {
    const std::vector<Point2> p{{1, 2}, {3, 4}}, gt1{{1, 2}, {3, 4}, {5, 6}}, shifted{{1, 9}, {3, 11}, {5, 13}};
    const std::vector<Point2> zero{{0, 0}, {0, 0}}, err{{3, 0}, {0, 4}};
    check("rmse exact", rmse_norm(p, p, 10.0), 0.0, kReal);
    check("rmse offset d", rmse_norm(shifted, gt1, 7.0), 1.0, kReal);
    check("rmse hand", rmse_norm(err, zero, 5.0), std::sqrt(12.5) / 5.0, kReal);
  }
  check("iou identical", iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0, kRational);
  check("iou disjoint", iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0, kRational);
  check("iou hand", iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0, kRational);
  {
    const std::vector<Box> gt4(4, Box{0, 0, 10, 10});
    const std::vector<std::optional<Box>> same(gt4.begin(), gt4.end()), none(4);
    const std::vector<std::optional<Box>> hand{Box{0, 0, 10, 8}, Box{0, 0, 10, 5}, Box{0, 0, 10, 3}, std::nullopt};
    const std::vector<double> thr = default_iou_thresholds(), one{0.45};
    for (const auto& s : bbox_f1_sweep(same, gt4, thr)) check("sweep perfect", s.f1, 1.0, kRational);
    for (const auto& s : bbox_f1_sweep(none, gt4, thr)) check("sweep absent", s.f1, 0.0, kRational);
    check("sweep hand", bbox_f1_sweep(hand, gt4, one)[0].f1, 4.0 / 7.0, kRational);
  }
  {
    const auto tied = friedman({{1, 1, 1}, {2, 2, 2}, {5, 5, 5}});
    check("friedman tied chi2", tied.chi2, 0.0, kRational);
    check("friedman tied p", tied.p_value, 1.0, kRational);
    const auto ranked = friedman({{0.1, 0.2, 0.3}, {1, 2, 3}, {10, 20, 30}});
    check("friedman chi2", ranked.chi2, 6.0, kRational);
    check("friedman df", ranked.df, 2.0, 0.0);
    FriedmanResult big;
    big.chi2 = 583.87;
    big.df = 4;
    big.p_value = 1e-100;
    if (format_friedman(big) != "X2(4)=583.87, p<.001") failed.push_back("friedman format");
  }
  {
    std::vector<std::vector<double>> two(30, {1.0, 2.0});
    const auto ph = posthoc_mean_ranks(friedman(two));
    if (!ph.significant[0][1] || !ph.significant[1][0]) failed.push_back("posthoc two treatments");
    std::vector<std::vector<double>> dom;
    test::Gen g(4);
    for (int b = 0; b < 30; ++b) {
      std::vector<double> row{0.0};
      for (int j = 1; j < 5; ++j) row.push_back(1.0 + g.real(0, 1));
      dom.push_back(row);
    }
    const auto pd = posthoc_mean_ranks(friedman(dom));
    for (int j = 1; j < 5; ++j)
      if (!pd.significant[0][j]) failed.push_back("posthoc dominant column vs " + std::to_string(j));
  }
  {
    const std::vector<int> a{10, 20, 31, 45}, b5{15, 25, 36, 50};
    const Agreement same = interrater_agreement(a, a), off = interrater_agreement(a, b5);
    check("raters identical r", same.r, 1.0, kReal);
    check("raters identical p3", same.p3, 100.0, kRational);
    check("raters offset r", off.r, 1.0, kReal);
    check("raters offset p3", off.p3, 0.0, kRational);
    if (format_agreement({0.951, 89.08}) != "r = 0.951  P3 = 89.08%") failed.push_back("agreement format");
  }
  std::string detail = failed.empty() ? "all examples reproduced" : "";
  for (const auto& f : failed) detail += (detail.empty() ? "" : "; ") + f;
  return {failed.empty(), detail};
}

Point2 rotate(Point2 p, Point2 c, double a) {
  const double dx = p.x - c.x, dy = p.y - c.y;
  return {c.x + std::cos(a) * dx - std::sin(a) * dy, c.y + std::sin(a) * dx + std::cos(a) * dy};
}
double dist(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Outcome geometry() {
  const auto t0 = Clock::now();
  test::Gen g(5);
  double worst = 0.0;
  int configs = 0;
  while (configs < 1000) {
    const SpineLandmarks lm{g.point(0, 341), g.point(0, 341)};
    if (dist(lm.c2, lm.c4) < 1.0) continue;
    ++configs;
    const bool flip = g.coin();
    const SpineTransform t = spine_transform(lm, flip);
    const Point2 p = g.point(-100, 450), q = g.point(-100, 450);
    worst = std::max(worst, std::abs(dist(to_spine(p, t), to_spine(q, t)) - dist(p, q)));
    const Point2 center = g.point(-200, 500);
    const double angle = g.real(-std::numbers::pi, std::numbers::pi);
    const SpineLandmarks rot{rotate(lm.c2, center, angle), rotate(lm.c4, center, angle)};
    const Point2 a = to_spine(p, t), b = to_spine(rotate(p, center, angle), spine_transform(rot, flip));
    worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y)});
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 5.0, "1000 configs, worst deviation " + sci(worst) + ", " + fmt(t, 2) + " s"};
}

// ------------------------------------------------------------- 6 to 9

/// One full phantom run through the CLI entry point.
struct EndToEnd {
  fs::path root;
  bool ok = false;
  std::string failure;
  double train_seconds = 0.0, localize_seconds = 0.0;
  std::size_t test_subjects = 0;

  void step(const std::vector<std::string>& args, double* seconds = nullptr) {
    if (!failure.empty()) return;
    std::ostringstream out, err;
    const auto t0 = Clock::now();
    const int code = run_subcommand(args, out, err);
    if (seconds) *seconds += seconds_since(t0);
    std::ofstream(root / "log.txt", std::ios::app) << out.str() << err.str();
    if (code != 0) failure = args.front() + " exited " + std::to_string(code) + ": " + err.str();
  }

  void run(const fs::path& dir) {
    root = dir;
    fs::create_directories(root);
    const std::string d = root.string();
    const std::string seed = "7";
    const std::vector<std::string> batch = {"--manifest", d + "/data/manifest.csv", "--split", d + "/split.csv",
                                            "--subset", "test", "--seed", seed};
    auto with = [&](std::vector<std::string> a) {
      a.insert(a.end(), batch.begin(), batch.end());
      return a;
    };
    step({"phantom", "--subjects", "40", "--clips-per-subject", "2", "--difficulty", "standard", "--seed", seed,
          "--out-dir", d + "/data"});
    step({"split", "--manifest", d + "/data/manifest.csv", "--ratios", "0.6,0.1,0.3", "--seed", seed, "--out",
          d + "/split.csv"});
    step({"train", "--manifest", d + "/data/manifest.csv", "--annotations", d + "/data/annotations.csv", "--split",
          d + "/split.csv", "--arch", "cnn4", "--net-size", "128", "--epochs", "100", "--batch", "8", "--lr", "0.001",
          "--seed", seed, "--out", d + "/ckpt"},
         &train_seconds);
    step(with({"predict", "--ckpt", d + "/ckpt", "--out-dir", d + "/pred"}));
    step({"decode", "--probs-dir", d + "/pred", "--out", d + "/events.csv"});
    step({"eval-phase", "--manifest", d + "/data/manifest.csv", "--annotations", d + "/data/annotations.csv",
          "--split", d + "/split.csv", "--probs-dir", d + "/pred", "--events", d + "/events.csv", "--backbone", "cnn4",
          "--out-dir", d + "/eval"});
    step(with({"localize", "--ckpt", d + "/ckpt", "--annotations", d + "/data/annotations.csv", "--frames",
               "annotated", "--out-dir", d + "/loc"}),
         &localize_seconds);
    step({"eval-localize", "--manifest", d + "/data/manifest.csv", "--annotations", d + "/data/annotations.csv",
          "--landmarks", d + "/data/landmarks.csv", "--split", d + "/split.csv", "--bolus-dir", d + "/loc", "--truth",
          d + "/data/truth.csv", "--backbone", "cnn4", "--out-dir", d + "/eval"},
         &localize_seconds);
    step({"report", "--inputs", d + "/eval", "--annotations", d + "/data/annotations.csv", "--out-dir",
          d + "/report"});
    if (failure.empty()) {
      const auto manifest = load_manifest(root / "data/manifest.csv", false);
      const DatasetSplit split = load_split(root / "split.csv");
      std::set<std::string> subjects;
      for (const auto& e : manifest)
        if (split.test_clips.count(e.clip_id)) subjects.insert(e.subject_id);
      test_subjects = subjects.size();
    }
    ok = failure.empty();
  }
};

Outcome phase_detection(const EndToEnd& run) {
  if (!run.ok) return {false, run.failure};
  const io::CsvTable t = io::read_csv(run.root / "eval/phase_table.csv");
  const auto& row = t.rows.at(0);
  const double f1 = io::parse_double(row[t.require_column("f1", "phase_table.csv")], "f1");
  const double pb = io::parse_double(row[t.require_column("p3_bpm", "phase_table.csv")], "p3_bpm");
  const double pu = io::parse_double(row[t.require_column("p3_uesc", "phase_table.csv")], "p3_uesc");
  const bool pass = run.test_subjects == 12 && f1 >= 0.95 && pb >= 90.0 && pu >= 90.0 && run.train_seconds <= 4 * 3600;
  return {pass, "F1 " + fmt(f1) + ", P3_BPM " + fmt(pb, 2) + "%, P3_UESC " + fmt(pu, 2) + "%, " +
                    std::to_string(run.test_subjects) + " test subjects, training " + fmt(run.train_seconds / 60, 1) +
                    " min"};
}

Outcome localization(const EndToEnd& run) {
  if (!run.ok) return {false, run.failure};
  const io::CsvTable t = io::read_csv(run.root / "eval/localization_table.csv");
  const auto& row = t.rows.at(0);
  const std::string ry_s = row[t.require_column("r_y", "localization_table.csv")];
  const std::string rmse_s = row[t.require_column("rmse", "localization_table.csv")];
  if (ry_s.empty() || rmse_s.empty()) return {false, "no detections to score"};
  const double ry = io::parse_double(ry_s, "r_y");
  const double rmse = std::stod(rmse_s);
  const bool pass = ry >= 0.9 && rmse <= 0.25 && run.localize_seconds <= 600.0;
  return {pass, "r_y " + fmt(ry) + ", RMSE " + rmse_s + ", localize+eval " + fmt(run.localize_seconds, 1) + " s"};
}

std::vector<fs::path> csv_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const EndToEnd& a, const EndToEnd& b) {
  if (!a.ok || !b.ok) return {false, a.ok ? b.failure : a.failure};
  const auto fa = csv_files(a.root), fb = csv_files(b.root);
  if (fa != fb) return {false, "runs emitted different CSV file sets"};
  std::vector<std::string> differing;
  for (const auto& f : fa)
    if (slurp(a.root / f) != slurp(b.root / f)) differing.push_back(f.string());
  std::string detail = std::to_string(fa.size()) + " CSV files compared";
  if (!differing.empty()) detail += ", differing: " + differing.front() + (differing.size() > 1 ? " and others" : "");
  return {differing.empty(), detail};
}

Outcome schema(const EndToEnd& run) {
  if (!run.ok) return {false, run.failure};
  std::vector<std::string> problems;
  auto expect_header = [&](const std::string& file, const std::vector<std::string>& cols) {
    const fs::path p = run.root / "report" / file;
    if (!fs::exists(p)) {
      problems.push_back(file + " missing");
      return io::CsvTable{};
    }
    io::CsvTable t = io::read_csv(p);
    if (t.header != cols) problems.push_back(file + " header mismatch");
    return t;
  };
  const std::regex median_iqr(R"(^-?\d+\.\d{3} \(-?\d+\.\d{3}--?\d+\.\d{3}\)$)");
  const auto phase = expect_header("phase_table.csv", {"backbone", "f1", "p3_bpm", "p3_uesc"});
  if (phase.rows.size() != 1) problems.push_back("phase_table.csv should have one backbone row");
  expect_header("phase_by_consistency.csv", {"consistency", "backbone", "n", "f1", "p3_bpm", "p3_uesc"});
  const auto loc = expect_header("localization_table.csv", {"backbone", "r_y", "rmse"});
  for (const auto& r : loc.rows)
    if (r.size() != 3 || !std::regex_match(r[2], median_iqr)) problems.push_back("rmse field not 'median (q1-q3)'");
  const auto byc =
      expect_header("localization_by_consistency.csv", {"consistency", "backbone", "n", "n_detected", "r_y", "rmse"});
  std::set<std::string> levels;
  for (const auto& r : byc.rows) {
    levels.insert(r.at(0));
    if (!r.at(5).empty() && !std::regex_match(r[5], median_iqr)) problems.push_back("per-consistency rmse format");
  }
  for (Consistency c : kAllConsistencies)
    if (!levels.count(std::string(to_string(c)))) problems.push_back("no section for " + std::string(to_string(c)));
  expect_header("f1_sweep.csv", {"backbone", "threshold", "f1"});
  std::string detail = problems.empty() ? "phase and localization table layouts match" : "";
  for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

  int failures = 0;
  auto report = [&](int n, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
    failures += !o.pass;
  };

  if (want(1)) report(1, "decoder oracle", decoder_oracle);
  if (want(2)) report(2, "grad-cam gradient check", gradcam_check);
  if (want(3)) report(3, "gac disk recovery", gac_disk);
  if (want(4)) report(4, "metric identities", metric_identities);
  if (want(5)) report(5, "geometry", geometry);

  const bool need_run = want(6) || want(7) || want(8) || want(9);
  if (need_run) {
    test::ScratchDir scratch("acceptance");
    EndToEnd first;
    first.run(scratch / "run1");
    if (want(6)) report(6, "phantom phase detection", [&] { return phase_detection(first); });
    if (want(7)) report(7, "phantom localization", [&] { return localization(first); });
    if (want(8)) {
      EndToEnd second;
      second.run(scratch / "run2");
      report(8, "determinism", [&] { return determinism(first, second); });
    }
    if (want(9)) report(9, "schema fidelity", [&] { return schema(first); });
    if (const char* keep = std::getenv("VFSS_ACCEPTANCE_KEEP")) {
      std::error_code ec;
      fs::copy(scratch.path(), keep, fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
    }
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
