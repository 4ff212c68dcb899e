#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vfss/error.hpp"

namespace vfss {

/// Dense row-major 2-D grid. Used for raw frames, preprocessed frames,
/// activation maps and binary masks alike.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DataError("negative image dimensions");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }

  bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  std::span<T> row(int r) noexcept { return {data_.data() + index(r, 0), static_cast<std::size_t>(cols_)}; }
  std::span<const T> row(int r) const noexcept {
    return {data_.data() + index(r, 0), static_cast<std::size_t>(cols_)};
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Gray8 = Image<std::uint8_t>;
using ImageF = Image<float>;
/// Binary mask: 0 = background, 1 = foreground.
using Mask = Image<std::uint8_t>;

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline std::size_t count_foreground(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.pixels()) n += (v != 0);
  return n;
}

}  // namespace vfss
