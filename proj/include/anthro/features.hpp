#pragma once

// Lesion cues (brightness comparisons around the known lesion location) and
// background-complexity features (regional energy and consecutive-slice
// PSNR / SSIM).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "anthro/core.hpp"
#include "anthro/gaussian.hpp"
#include "anthro/stack.hpp"
#include "anthro/stackgen.hpp"

namespace anthro {

/// Pixel set centered on the slice center: inner <= distance <= outer, by
/// integer-grid Euclidean distance. A disk has inner = 0.
struct Region {
  double inner = 0.0;
  double outer = 0.0;

  static constexpr Region disk(double r) { return {0.0, r}; }
  static constexpr Region ring(double r_in, double r_out) { return {r_in, r_out}; }

  bool contains(int dy, int dx) const {
    const double d2 = static_cast<double>(dy * dy + dx * dx);
    return d2 >= inner * inner && d2 <= outer * outer;
  }
};

namespace roi {
inline constexpr Region kLesionDisk = Region::disk(3.0);
inline constexpr Region kSurroundRing = Region::ring(5.0, 7.0);
inline constexpr Region kNeighborDisk = Region::disk(4.0);
inline constexpr Region kEnergyDisk = Region::disk(7.0);
}  // namespace roi

struct LesionFeatures {
  double f1 = 0.0;  // lesion disk vs surround ring, same slice
  double f2 = 0.0;  // lesion disk vs previous slice
  double f3 = 0.0;  // lesion disk vs next slice
};

struct ComplexityFeatures {
  double b1 = 0.0;         // local energy of the lesion neighborhood
  double b2 = 0.0;         // energy of slice 16
  std::vector<double> b3;  // PSNR of consecutive slices (dB)
  std::vector<double> b4;  // SSIM of consecutive slices
};

namespace detail {

template <typename Fn>
void for_each_in_region(const SliceView& s, const Region& region, Fn&& fn) {
  const int cy = s.rows / 2, cx = s.cols / 2;
  const int ext = static_cast<int>(std::floor(region.outer));
  if (cy - ext < 0 || cy + ext >= s.rows || cx - ext < 0 || cx + ext >= s.cols)
    throw GeometryError("region does not fit within the slice");
  for (int y = cy - ext; y <= cy + ext; ++y)
    for (int x = cx - ext; x <= cx + ext; ++x)
      if (region.contains(y - cy, x - cx)) fn(s.at(y, x));
}

}  // namespace detail

inline std::size_t region_size(const SliceView& s, const Region& region) {
  std::size_t n = 0;
  detail::for_each_in_region(s, region, [&](double) { ++n; });
  return n;
}

inline double region_mean(const SliceView& s, const Region& region) {
  double sum = 0.0;
  std::size_t n = 0;
  detail::for_each_in_region(s, region, [&](double v) {
    sum += v;
    ++n;
  });
  if (n == 0) throw GeometryError("empty region");
  return sum / static_cast<double>(n);
}

inline LesionFeatures compute_lesion_features(const Stack& st) {
  if (st.dims.slices < kLesionSlice + 1)
    throw GeometryError("lesion features need at least 17 slices");
  const SliceView lesion = st.slice(kLesionSlice);
  const double m = region_mean(lesion, roi::kLesionDisk);
  return {m - region_mean(lesion, roi::kSurroundRing),
          m - region_mean(st.slice(kLesionSlice - 1), roi::kNeighborDisk),
          m - region_mean(st.slice(kLesionSlice + 1), roi::kNeighborDisk)};
}

enum class EnergyScope { lesion_roi, whole_slice16 };

/// Mean squared deviation from the regional mean (local variance).
inline double region_energy(const Stack& st, EnergyScope scope) {
  const SliceView s = st.slice(kLesionSlice);
  if (scope == EnergyScope::whole_slice16) return variance_of(s.data);
  const double m = region_mean(s, roi::kEnergyDisk);
  double acc = 0.0;
  std::size_t n = 0;
  detail::for_each_in_region(s, roi::kEnergyDisk, [&](double v) {
    acc += (v - m) * (v - m);
    ++n;
  });
  return acc / static_cast<double>(n);
}

inline constexpr double kDisplayMax = 255.0;
inline constexpr double kPsnrCap = 100.0;

/// PSNR against the fixed display range maximum 255; capped at 100 dB.
inline double psnr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw DataError("psnr: image size mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - y[i]) * (x[i] - y[i]);
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 20.0 * std::log10(kDisplayMax) - 10.0 * std::log10(mse));
}

/// Mean SSIM with the canonical parameters: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, L = 255, averaged over all positions where the window
/// fits inside the image.
inline double ssim(const SliceView& x, const SliceView& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw DataError("ssim: image size mismatch");
  constexpr int kRadius = 5;
  if (x.rows < 2 * kRadius + 1 || x.cols < 2 * kRadius + 1)
    throw GeometryError("ssim: image smaller than the 11x11 window");
  static const std::vector<double> w = [] {
    std::vector<double> k(2 * kRadius + 1);
    double sum = 0.0;
    for (int i = -kRadius; i <= kRadius; ++i) sum += (k[i + kRadius] = std::exp(-(i * i) / (2 * 1.5 * 1.5)));
    for (double& v : k) v /= sum;
    return k;
  }();
  const double c1 = (0.01 * kDisplayMax) * (0.01 * kDisplayMax);
  const double c2 = (0.03 * kDisplayMax) * (0.03 * kDisplayMax);
  const int rows = x.rows, cols = x.cols;
  const int out_cols = cols - 2 * kRadius, out_rows = rows - 2 * kRadius;

  // Horizontal pass for the five moment images, then vertical pass per output.
  const std::size_t hsz = static_cast<std::size_t>(rows) * out_cols;
  std::vector<double> hx(hsz), hy(hsz), hxx(hsz), hyy(hsz), hxy(hsz);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < out_cols; ++c) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int j = 0; j <= 2 * kRadius; ++j) {
        const double a = x.at(r, c + j), b = y.at(r, c + j), wj = w[j];
        sx += wj * a;
        sy += wj * b;
        sxx += wj * a * a;
        syy += wj * b * b;
        sxy += wj * a * b;
      }
      const std::size_t i = static_cast<std::size_t>(r) * out_cols + c;
      hx[i] = sx, hy[i] = sy, hxx[i] = sxx, hyy[i] = syy, hxy[i] = sxy;
    }
  double total = 0.0;
  for (int r = 0; r < out_rows; ++r)
    for (int c = 0; c < out_cols; ++c) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int j = 0; j <= 2 * kRadius; ++j) {
        const std::size_t i = static_cast<std::size_t>(r + j) * out_cols + c;
        const double wj = w[j];
        mx += wj * hx[i];
        my += wj * hy[i];
        mxx += wj * hxx[i];
        myy += wj * hyy[i];
        mxy += wj * hxy[i];
      }
      const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / (static_cast<double>(out_rows) * out_cols);
}

inline ComplexityFeatures compute_complexity_features(const Stack& st, bool with_ssim = true) {
  if (st.dims.slices < kLesionSlice) throw GeometryError("complexity features need slice 16");
  ComplexityFeatures cf;
  cf.b1 = region_energy(st, EnergyScope::lesion_roi);
  cf.b2 = region_energy(st, EnergyScope::whole_slice16);
  const int pairs = st.dims.slices - 1;
  cf.b3.reserve(pairs);
  if (with_ssim) cf.b4.reserve(pairs);
  for (int i = 1; i <= pairs; ++i) {
    const SliceView a = st.slice(i), b = st.slice(i + 1);
    cf.b3.push_back(psnr(a.data, b.data));
    if (with_ssim) cf.b4.push_back(ssim(a, b));
  }
  return cf;
}

}  // namespace anthro
