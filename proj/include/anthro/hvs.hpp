#pragma once

// Band-pass stand-in for the visual-system simulation: a spatial
// difference-of-Gaussians (center minus surround) followed by Gaussian
// smoothing across slices. All kernels have unit sum, so every frequency gain
// lies in [0, 1] and the constant component is removed.

#include "anthro/core.hpp"
#include "anthro/gaussian.hpp"
#include "anthro/stack.hpp"

namespace anthro {

struct HvsConfig {
  double center_sigma = 1.0;
  double surround_sigma = 4.0;
  double temporal_sigma = 1.0;
  bool enabled = true;

  void validate() const {
    if (!(center_sigma >= 0) || !(surround_sigma > center_sigma))
      throw ConfigError("hvs requires surround_sigma > center_sigma >= 0");
    if (!(temporal_sigma >= 0)) throw ConfigError("hvs temporal_sigma must be >= 0");
  }
};

inline Stack apply_hvs(const Stack& in, const HvsConfig& cfg) {
  cfg.validate();
  if (!cfg.enabled) return in;
  Stack out = in;
  out.post_hvs = true;
  out.normalization = {};
  if (in.voxels.empty()) return out;

  // The DoG ignores DC; referencing the first voxel keeps constant input at
  // exactly zero.
  std::vector<double> centered(in.voxels.size());
  const double ref = in.voxels.front();
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = in.voxels[i] - ref;

  const auto kc = gaussian_kernel(cfg.center_sigma);
  const auto ks = gaussian_kernel(cfg.surround_sigma);
  auto smooth2d = [&](const std::vector<double>& k) {
    auto a = convolve_reflect(centered, in.dims, Axis::rows, k);
    return convolve_reflect(a, in.dims, Axis::cols, k);
  };
  const auto center = smooth2d(kc);
  const auto surround = smooth2d(ks);
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = center[i] - surround[i];
  out.voxels = convolve_reflect(centered, in.dims, Axis::slices, gaussian_kernel(cfg.temporal_sigma));
  return out;
}

}  // namespace anthro
