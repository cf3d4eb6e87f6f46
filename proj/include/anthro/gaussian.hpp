#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "anthro/core.hpp"
#include "anthro/rng.hpp"
#include "anthro/stack.hpp"

namespace anthro {

/// Sampled Gaussian, truncated at ceil(4 sigma), normalized to unit sum.
/// sigma == 0 yields the identity kernel {1}.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0 || !std::isfinite(sigma)) throw ConfigError("kernel sigma must be >= 0");
  if (sigma == 0) return {1.0};
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

inline int kernel_radius(const std::vector<double>& k) { return static_cast<int>(k.size() / 2); }

enum class Axis { slices, rows, cols };

namespace detail {

inline int extent(const Dims& d, Axis a) {
  return a == Axis::slices ? d.slices : a == Axis::rows ? d.rows : d.cols;
}

inline std::size_t stride(const Dims& d, Axis a) {
  return a == Axis::slices ? d.slice_size() : a == Axis::rows ? static_cast<std::size_t>(d.cols) : 1;
}

// Half-sample symmetric extension: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline int reflect_index(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace detail

/// 'Valid' convolution along one axis: the output is shorter by 2*radius.
inline std::vector<double> convolve_valid(std::span<const double> in, const Dims& d, Axis axis,
                                          const std::vector<double>& k, Dims& out_dims) {
  const int r = kernel_radius(k);
  out_dims = d;
  int& len = axis == Axis::slices ? out_dims.slices : axis == Axis::rows ? out_dims.rows : out_dims.cols;
  len -= 2 * r;
  if (len <= 0) throw ConfigError("kernel larger than padded domain");
  std::vector<double> out(out_dims.voxels(), 0.0);
  const std::size_t in_stride = detail::stride(d, axis);
  for (int s = 0; s < out_dims.slices; ++s)
    for (int y = 0; y < out_dims.rows; ++y)
      for (int x = 0; x < out_dims.cols; ++x) {
        const std::size_t base = (static_cast<std::size_t>(s) * d.rows + y) * d.cols + x;
        double acc = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) acc += k[j] * in[base + j * in_stride];
        out[(static_cast<std::size_t>(s) * out_dims.rows + y) * out_dims.cols + x] = acc;
      }
  return out;
}

/// Same-size convolution along one axis with symmetric boundary extension.
inline std::vector<double> convolve_reflect(std::span<const double> in, const Dims& d, Axis axis,
                                            const std::vector<double>& k) {
  const int r = kernel_radius(k);
  const int n = detail::extent(d, axis);
  const std::size_t st = detail::stride(d, axis);
  std::vector<double> out(in.size(), 0.0);
  for (int s = 0; s < d.slices; ++s)
    for (int y = 0; y < d.rows; ++y)
      for (int x = 0; x < d.cols; ++x) {
        const int pos = axis == Axis::slices ? s : axis == Axis::rows ? y : x;
        const std::size_t idx = (static_cast<std::size_t>(s) * d.rows + y) * d.cols + x;
        const std::size_t line0 = idx - static_cast<std::size_t>(pos) * st;
        double acc = 0.0;
        for (int j = -r; j <= r; ++j)
          acc += k[j + r] * in[line0 + static_cast<std::size_t>(detail::reflect_index(pos + j, n)) * st];
        out[idx] = acc;
      }
  return out;
}

/// White Gaussian noise (unit variance) filtered by a separable Gaussian with
/// the given in-plane and through-slice sigmas. The noise is drawn on a padded
/// domain and filtered 'valid', so the output field is stationary with variance
/// sum(k_t^2) * sum(k_s^2)^2.
inline std::vector<double> filtered_noise(Engine& rng, const Dims& d, double spatial_sigma,
                                          double temporal_sigma) {
  const auto ks = gaussian_kernel(spatial_sigma);
  const auto kt = gaussian_kernel(temporal_sigma);
  const int rs = kernel_radius(ks), rt = kernel_radius(kt);
  Dims padded{d.slices + 2 * rt, d.rows + 2 * rs, d.cols + 2 * rs};
  std::vector<double> noise(padded.voxels());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : noise) v = normal(rng);
  Dims d1, d2, d3;
  auto a = convolve_valid(noise, padded, Axis::slices, kt, d1);
  auto b = convolve_valid(a, d1, Axis::rows, ks, d2);
  auto c = convolve_valid(b, d2, Axis::cols, ks, d3);
  return c;
}

}  // namespace anthro
