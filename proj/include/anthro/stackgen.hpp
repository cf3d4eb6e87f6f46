#pragma once

// Synthetic lesion-present / lesion-absent stacks at configurable background
// complexity. The base texture and the complexity noise are both
// Gaussian-filtered white noise; they differ in correlation structure (the
// complexity field is smoother in-plane and rougher across slices).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "anthro/core.hpp"
#include "anthro/gaussian.hpp"
#include "anthro/rng.hpp"
#include "anthro/stack.hpp"

namespace anthro {

/// 1-based slice carrying the lesion; features look at it and its neighbors.
inline constexpr int kLesionSlice = 16;
inline constexpr int kMaxComplexityLevel = 4;

struct GenConfig {
  Dims dims{32, 64, 64};
  double lesion_radius = 3.0;
  double lesion_amplitude = 14.0;
  double base_noise_sigma = 100.0;
  double mid_gray = 128.0;
  double spatial_kernel_sigma = 1.5;
  double temporal_kernel_sigma = 2.0;
  double complexity_spatial_sigma = 7.0;
  double complexity_temporal_sigma = 0.7;
  /// Levels 0..4. When unset: (0, a, 2a, 4a, 8a) with a = base_noise_sigma / 2.
  std::optional<std::array<double, 5>> complexity_amplitudes;
  std::uint64_t master_seed = 20150221;

  std::array<double, 5> amplitudes() const {
    if (complexity_amplitudes) return *complexity_amplitudes;
    const double a = base_noise_sigma / 2.0;
    return {0.0, a, 2 * a, 4 * a, 8 * a};
  }

  void validate() const {
    if (dims.slices <= 0 || dims.rows <= 0 || dims.cols <= 0)
      throw ConfigError("stack dimensions must be positive");
    if (!(spatial_kernel_sigma > 0) || !(temporal_kernel_sigma > 0) ||
        !(complexity_spatial_sigma > 0) || !(complexity_temporal_sigma > 0))
      throw ConfigError("kernel sigmas must be positive");
    if (!(base_noise_sigma >= 0)) throw ConfigError("base_noise_sigma must be >= 0");
    if (!(lesion_radius >= 0)) throw ConfigError("lesion_radius must be >= 0");
    if (!std::isfinite(lesion_amplitude) || !std::isfinite(mid_gray))
      throw ConfigError("lesion_amplitude and mid_gray must be finite");
    const auto amps = amplitudes();
    if (amps[0] != 0.0) throw ConfigError("complexity_amplitudes[0] must be 0");
    for (int l = 1; l <= kMaxComplexityLevel; ++l) {
      if (!(amps[l] >= 0) || !std::isfinite(amps[l]))
        throw ConfigError("complexity amplitudes must be finite and non-negative");
      if (l > 1 && !(amps[l] > amps[l - 1]))
        throw ConfigError("complexity amplitudes must increase strictly over levels 1..4");
    }
  }
};

inline std::uint64_t stack_seed(const GenConfig& cfg, std::uint64_t stack_id) {
  return derive_seed(cfg.master_seed, stack_id, "stack");
}

/// Healthy stack: mid-gray plus base_noise_sigma times Gaussian-filtered white
/// noise. Deterministic in (master_seed, stack_id).
inline Stack generate_background(const GenConfig& cfg, std::uint64_t stack_id) {
  cfg.validate();
  Stack st(cfg.dims, cfg.mid_gray);
  st.stack_id = stack_id;
  st.seed = stack_seed(cfg, stack_id);
  if (cfg.base_noise_sigma > 0) {
    auto rng = make_engine(st.seed, stack_id, "background");
    const auto field = filtered_noise(rng, cfg.dims, cfg.spatial_kernel_sigma, cfg.temporal_kernel_sigma);
    for (std::size_t i = 0; i < st.voxels.size(); ++i)
      st.voxels[i] = cfg.mid_gray + cfg.base_noise_sigma * field[i];
  }
  return st;
}

inline Stack add_complexity_noise(Stack st, int level, const GenConfig& cfg) {
  cfg.validate();
  if (level < 0 || level > kMaxComplexityLevel)
    throw ConfigError("complexity level must be in 0..4");
  if (st.dims != cfg.dims) throw ConfigError("stack dimensions do not match configuration");
  st.complexity_level = level;
  const double amp = cfg.amplitudes()[level];
  if (amp == 0.0) return st;
  auto rng = make_engine(st.seed, st.stack_id, "complexity", static_cast<std::uint64_t>(level));
  const auto field =
      filtered_noise(rng, cfg.dims, cfg.complexity_spatial_sigma, cfg.complexity_temporal_sigma);
  for (std::size_t i = 0; i < st.voxels.size(); ++i) st.voxels[i] += amp * field[i];
  return st;
}

/// Adds lesion_amplitude to every pixel within lesion_radius of the spatial
/// center of slice 16.
inline Stack insert_lesion(Stack st, const GenConfig& cfg) {
  if (st.label != Label::healthy) throw DataError("lesion insertion requires a healthy stack");
  const int cy = st.dims.rows / 2, cx = st.dims.cols / 2;
  const double r = cfg.lesion_radius;
  const int ri = static_cast<int>(std::floor(r));
  if (st.dims.slices < kLesionSlice || cy - ri < 0 || cy + ri >= st.dims.rows || cx - ri < 0 ||
      cx + ri >= st.dims.cols)
    throw ConfigError("lesion footprint exceeds stack bounds");
  for (int y = cy - ri; y <= cy + ri; ++y)
    for (int x = cx - ri; x <= cx + ri; ++x) {
      const double d2 = static_cast<double>((y - cy) * (y - cy) + (x - cx) * (x - cx));
      if (d2 <= r * r) st.at(kLesionSlice - 1, y, x) += cfg.lesion_amplitude;
    }
  st.label = Label::lesion;
  return st;
}

/// Maps mean to 127.5 and mean +/- 4 std to [0, 255]. A constant stack maps to
/// 127.5 everywhere.
inline DisplayMapping display_mapping(const Stack& st) {
  const double m = mean_of(st.voxels);
  const double sd = std::sqrt(variance_of(st.voxels));
  DisplayMapping map;
  map.scale = sd > 0 ? 255.0 / (8.0 * sd) : 1.0;
  map.offset = 127.5 - map.scale * m;
  return map;
}

/// Returns the stack expressed in display units, with its mapping recorded.
inline Stack normalized(const Stack& st) {
  Stack out = st;
  const DisplayMapping map = display_mapping(st);
  for (double& v : out.voxels) v = map.apply(v);
  out.normalization = map;
  return out;
}

/// Rounds voxels to float32, the on-disk precision, so in-memory and reloaded
/// stacks agree bit for bit.
inline void quantize_to_float32(Stack& st) {
  for (double& v : st.voxels) v = static_cast<double>(static_cast<float>(v));
}

/// Complete synthesis of one dataset stack: background, complexity noise,
/// optional lesion, float32 quantization, and the display mapping.
inline Stack synthesize_stack(const GenConfig& cfg, std::uint64_t stack_id, Label label, int level) {
  Stack st = add_complexity_noise(generate_background(cfg, stack_id), level, cfg);
  if (label == Label::lesion) st = insert_lesion(std::move(st), cfg);
  quantize_to_float32(st);
  st.normalization = display_mapping(st);
  return st;
}

}  // namespace anthro
