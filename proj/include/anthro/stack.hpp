#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "anthro/core.hpp"

namespace anthro {

struct Dims {
  int slices = 32;
  int rows = 64;
  int cols = 64;

  std::size_t slice_size() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t voxels() const { return slice_size() * slices; }
  bool operator==(const Dims&) const = default;
};

// Affine map from stored signal units to the [0, 255] display range.
struct DisplayMapping {
  double offset = 0.0;
  double scale = 1.0;

  double apply(double v) const { return offset + scale * v; }
  bool operator==(const DisplayMapping&) const = default;
};

// Read-only 2-D view of one slice.
struct SliceView {
  std::span<const double> data;
  int rows = 0;
  int cols = 0;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// A labeled S x H x W volume, slice-major. Slice numbers in the public API are
// 1-based; storage is 0-based.
struct Stack {
  Dims dims;
  std::vector<double> voxels;
  std::uint64_t stack_id = 0;
  Label label = Label::healthy;
  int complexity_level = 0;
  std::uint64_t seed = 0;
  DisplayMapping normalization;
  bool post_hvs = false;

  Stack() = default;
  Stack(Dims d, double fill) : dims(d), voxels(d.voxels(), fill) {}

  std::size_t index(int slice0, int r, int c) const {
    return (static_cast<std::size_t>(slice0) * dims.rows + r) * dims.cols + c;
  }
  double& at(int slice0, int r, int c) { return voxels[index(slice0, r, c)]; }
  double at(int slice0, int r, int c) const { return voxels[index(slice0, r, c)]; }

  /// Slice by 1-based number.
  SliceView slice(int number) const {
    if (number < 1 || number > dims.slices)
      throw GeometryError("slice " + std::to_string(number) + " outside 1.." +
                          std::to_string(dims.slices));
    const auto n = dims.slice_size();
    return {std::span<const double>(voxels).subspan((number - 1) * n, n), dims.rows, dims.cols};
  }

  std::span<double> slice_mut(int number) {
    const auto n = dims.slice_size();
    return std::span<double>(voxels).subspan((number - 1) * n, n);
  }
};

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double variance_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace anthro
