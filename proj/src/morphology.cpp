#include "vfss/morphology.hpp"

#include <algorithm>
#include <array>
#include <deque>

namespace vfss::morph {

namespace {

inline std::uint8_t at(const Mask& m, int r, int c) { return m.contains(r, c) ? m(r, c) : 0; }

constexpr std::array<std::array<int, 2>, 4> kLines = {{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

}  // namespace

Mask dilate_disk(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  std::vector<Pixel> offsets;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius) offsets.push_back({dr, dc});
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      for (const auto& o : offsets)
        if (out.contains(r + o.row, c + o.col)) out(r + o.row, c + o.col) = 1;
    }
  return out;
}

Mask dilate3x3(const Mask& mask) {
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      std::uint8_t v = 0;
      for (int dr = -1; dr <= 1 && !v; ++dr)
        for (int dc = -1; dc <= 1 && !v; ++dc) v = at(mask, r + dr, c + dc);
      out(r, c) = v;
    }
  return out;
}

Mask erode3x3(const Mask& mask) {
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      std::uint8_t v = 1;
      for (int dr = -1; dr <= 1 && v; ++dr)
        for (int dc = -1; dc <= 1 && v; ++dc) v = at(mask, r + dr, c + dc);
      out(r, c) = v;
    }
  return out;
}

Mask fill_holes(const Mask& mask) {
  const int rows = mask.rows(), cols = mask.cols();
  Mask outside(rows, cols, 0);
  std::deque<Pixel> queue;
  auto seed = [&](int r, int c) {
    if (!mask(r, c) && !outside(r, c)) {
      outside(r, c) = 1;
      queue.push_back({r, c});
    }
  };
  for (int r = 0; r < rows; ++r) {
    seed(r, 0);
    seed(r, cols - 1);
  }
  for (int c = 0; c < cols; ++c) {
    seed(0, c);
    seed(rows - 1, c);
  }
  constexpr std::array<Pixel, 4> n4 = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  while (!queue.empty()) {
    const Pixel p = queue.front();
    queue.pop_front();
    for (const auto& d : n4) {
      const int r = p.row + d.row, c = p.col + d.col;
      if (mask.contains(r, c)) seed(r, c);
    }
  }
  Mask out(rows, cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = outside(r, c) ? 0 : 1;
  return out;
}

std::vector<Component> connected_components(const Mask& mask, Image<int>& labels) {
  labels = Image<int>(mask.rows(), mask.cols(), 0);
  std::vector<Component> comps;
  std::vector<Pixel> stack;
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c) || labels(r, c)) continue;
      Component comp;
      comp.label = static_cast<int>(comps.size()) + 1;
      comp.first = {r, c};
      labels(r, c) = comp.label;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        ++comp.area;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = p.row + dr, cc = p.col + dc;
            if (mask.contains(rr, cc) && mask(rr, cc) && !labels(rr, cc)) {
              labels(rr, cc) = comp.label;
              stack.push_back({rr, cc});
            }
          }
      }
      comps.push_back(comp);
    }
  return comps;
}

Mask largest_component(const Mask& mask) {
  Image<int> labels;
  const auto comps = connected_components(mask, labels);
  Mask out(mask.rows(), mask.cols(), 0);
  if (comps.empty()) return out;
  // Components are already in raster order of their first pixel, so the
  // first maximum wins ties.
  const auto best = std::max_element(comps.begin(), comps.end(),
                                     [](const Component& a, const Component& b) { return a.area < b.area; });
  auto src = labels.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == best->label;
  return out;
}

Mask sup_inf(const Mask& mask) {
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      for (const auto& l : kLines) {
        if (at(mask, r + l[0], c + l[1]) && at(mask, r - l[0], c - l[1])) {
          out(r, c) = 1;
          break;
        }
      }
    }
  return out;
}

Mask inf_sup(const Mask& mask) {
  Mask out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      std::uint8_t v = 1;
      for (const auto& l : kLines) {
        if (!(mask(r, c) || at(mask, r + l[0], c + l[1]) || at(mask, r - l[0], c - l[1]))) {
          v = 0;
          break;
        }
      }
      out(r, c) = v;
    }
  return out;
}

}  // namespace vfss::morph
