#include "vfss/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#include <set>
#include <sstream>

#include "vfss/error.hpp"

namespace vfss::io {

namespace {

const std::set<std::string> kFrameExtensions = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".pgm"};

long long stem_number(const fs::path& p) {
  const std::string stem = p.stem().string();
  long long value = -1;
  // last run of digits in the stem
  auto end = stem.find_last_of("0123456789");
  if (end == std::string::npos) return -1;
  auto begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  std::from_chars(stem.data() + begin, stem.data() + end + 1, value);
  return value;
}

Gray8 from_mat(const cv::Mat& gray) {
  Gray8 out(gray.rows, gray.cols);
  for (int r = 0; r < gray.rows; ++r) {
    const auto* src = gray.ptr<std::uint8_t>(r);
    std::copy(src, src + gray.cols, out.row(r).begin());
  }
  return out;
}

cv::Mat to_gray_mat(const cv::Mat& any) {
  cv::Mat gray;
  if (any.channels() == 3) {
    cv::cvtColor(any, gray, cv::COLOR_BGR2GRAY);
  } else if (any.channels() == 4) {
    cv::cvtColor(any, gray, cv::COLOR_BGRA2GRAY);
  } else {
    gray = any;
  }
  if (gray.depth() != CV_8U) gray.convertTo(gray, CV_8U);
  return gray;
}

}  // namespace

Gray8 read_gray(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw DataError("cannot read image: " + path.string());
  return from_mat(m);
}

void write_png(const fs::path& path, const Gray8& image) {
  cv::Mat m(image.rows(), image.cols(), CV_8UC1, const_cast<std::uint8_t*>(image.pixels().data()));
  if (!cv::imwrite(path.string(), m)) throw Error("cannot write image: " + path.string());
}

void write_png(const fs::path& path, const RgbImage& image) {
  cv::Mat m(image.rows(), image.cols(), CV_8UC3);
  for (int r = 0; r < image.rows(); ++r) {
    auto* dst = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < image.cols(); ++c) {
      const Rgb& px = image(r, c);
      dst[3 * c + 0] = px.b;
      dst[3 * c + 1] = px.g;
      dst[3 * c + 2] = px.r;
    }
  }
  if (!cv::imwrite(path.string(), m)) throw Error("cannot write image: " + path.string());
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (kFrameExtensions.count(ext) && stem_number(entry.path()) >= 0) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    const auto na = stem_number(a), nb = stem_number(b);
    return na != nb ? na < nb : a.filename() < b.filename();
  });
  return files;
}

int count_clip_frames(const fs::path& clip) {
  if (fs::is_directory(clip)) return static_cast<int>(list_frame_files(clip).size());
  if (!fs::exists(clip)) throw DataError("clip not found: " + clip.string());
  cv::VideoCapture cap(clip.string());
  if (!cap.isOpened()) throw DataError("cannot open video: " + clip.string());
  int n = 0;
  cv::Mat frame;
  while (cap.read(frame)) ++n;
  return n;
}

std::vector<Gray8> load_clip(const fs::path& clip) {
  std::vector<Gray8> frames;
  if (fs::is_directory(clip)) {
    for (const auto& f : list_frame_files(clip)) frames.push_back(read_gray(f));
    return frames;
  }
  if (!fs::exists(clip)) throw DataError("clip not found: " + clip.string());
  cv::VideoCapture cap(clip.string());
  if (!cap.isOpened()) throw DataError("cannot open video: " + clip.string());
  cv::Mat frame;
  while (cap.read(frame)) frames.push_back(from_mat(to_gray_mat(frame)));
  return frames;
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require_column(std::string_view name, const fs::path& source) const {
  const int c = column(name);
  if (c < 0) throw DataError(source.string() + ": missing column '" + std::string(name) + "'");
  return c;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      table.directives.push_back(t);
      continue;
    }
    auto fields = split_fields(t);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw DataError(path.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError(path.string() + ": missing header line");
  return table;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("invalid integer for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("invalid number for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create directory: " + dir.string());
}

}  // namespace vfss::io
