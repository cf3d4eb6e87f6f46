#pragma once

// On-disk stack format: raw little-endian float32 voxels, slice-major, plus a
// JSON sidecar. A dataset manifest lists every sidecar.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "anthro/core.hpp"
#include "anthro/stack.hpp"
#include "anthro/stackgen.hpp"

namespace anthro {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "stack files assume a little-endian host");

inline json to_json(const Dims& d) { return json::array({d.slices, d.rows, d.cols}); }

inline Dims dims_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("dims must be [slices, rows, cols]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

inline json to_json(const GenConfig& c) {
  json j{{"dims", to_json(c.dims)},
         {"lesion_radius", c.lesion_radius},
         {"lesion_amplitude", c.lesion_amplitude},
         {"base_noise_sigma", c.base_noise_sigma},
         {"mid_gray", c.mid_gray},
         {"spatial_kernel_sigma", c.spatial_kernel_sigma},
         {"temporal_kernel_sigma", c.temporal_kernel_sigma},
         {"complexity_spatial_sigma", c.complexity_spatial_sigma},
         {"complexity_temporal_sigma", c.complexity_temporal_sigma},
         {"complexity_amplitudes", c.amplitudes()},
         {"master_seed", c.master_seed}};
  return j;
}

inline GenConfig gen_config_from_json(const json& j) {
  GenConfig c;
  if (j.contains("dims")) c.dims = dims_from_json(j["dims"]);
  c.lesion_radius = j.value("lesion_radius", c.lesion_radius);
  c.lesion_amplitude = j.value("lesion_amplitude", c.lesion_amplitude);
  c.base_noise_sigma = j.value("base_noise_sigma", c.base_noise_sigma);
  c.mid_gray = j.value("mid_gray", c.mid_gray);
  c.spatial_kernel_sigma = j.value("spatial_kernel_sigma", c.spatial_kernel_sigma);
  c.temporal_kernel_sigma = j.value("temporal_kernel_sigma", c.temporal_kernel_sigma);
  c.complexity_spatial_sigma = j.value("complexity_spatial_sigma", c.complexity_spatial_sigma);
  c.complexity_temporal_sigma = j.value("complexity_temporal_sigma", c.complexity_temporal_sigma);
  if (j.contains("complexity_amplitudes")) {
    const auto v = j["complexity_amplitudes"].get<std::vector<double>>();
    if (v.size() != 5) throw ConfigError("complexity_amplitudes needs 5 values (levels 0..4)");
    c.complexity_amplitudes = std::array<double, 5>{v[0], v[1], v[2], v[3], v[4]};
  }
  c.master_seed = j.value("master_seed", c.master_seed);
  c.validate();
  return c;
}

inline json sidecar_json(const Stack& st, const std::string& file) {
  return json{{"stack_id", st.stack_id},
              {"dims", to_json(st.dims)},
              {"label", to_string(st.label)},
              {"complexity_level", st.complexity_level},
              {"seed", st.seed},
              {"normalization", {{"offset", st.normalization.offset}, {"scale", st.normalization.scale}}},
              {"file", file}};
}

inline void write_raw(const fs::path& path, const Stack& st) {
  std::vector<float> buf(st.voxels.size());
  std::transform(st.voxels.begin(), st.voxels.end(), buf.begin(),
                 [](double v) { return static_cast<float>(v); });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("short write to " + path.string());
}

inline void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Writes <dir>/stack_<id>.raw and its .json sidecar; returns the sidecar.
inline json save_stack(const fs::path& dir, const Stack& st) {
  const std::string stem = "stack_" + std::to_string(st.stack_id);
  write_raw(dir / (stem + ".raw"), st);
  json side = sidecar_json(st, stem + ".raw");
  write_json_file(dir / (stem + ".json"), side);
  return side;
}

/// Loads a stack from its sidecar entry; `dir` resolves the relative file name.
inline Stack load_stack(const fs::path& dir, const json& side) {
  Stack st;
  st.dims = dims_from_json(side.at("dims"));
  st.stack_id = side.at("stack_id").get<std::uint64_t>();
  st.label = label_from_string(side.at("label").get<std::string>());
  st.complexity_level = side.at("complexity_level").get<int>();
  st.seed = side.at("seed").get<std::uint64_t>();
  st.normalization.offset = side.at("normalization").at("offset").get<double>();
  st.normalization.scale = side.at("normalization").at("scale").get<double>();
  const fs::path file = dir / side.at("file").get<std::string>();
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::vector<float> buf(st.dims.voxels());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
    throw IoError("truncated stack file " + file.string());
  st.voxels.assign(buf.begin(), buf.end());
  return st;
}

struct DatasetEntry {
  std::uint64_t stack_id;
  Label label;
  int level;
};

/// Stack ids for a balanced dataset: for each level (ascending), n healthy then
/// n lesion stacks; ids start at 1.
inline std::vector<DatasetEntry> dataset_layout(int n_per_cell, const std::vector<int>& levels) {
  if (n_per_cell < 1) throw ConfigError("n_per_cell must be >= 1");
  std::set<int> uniq(levels.begin(), levels.end());
  if (uniq.empty()) throw ConfigError("at least one complexity level is required");
  for (int l : uniq)
    if (l < 0 || l > kMaxComplexityLevel) throw ConfigError("complexity level must be in 0..4");
  std::vector<DatasetEntry> out;
  std::uint64_t id = 1;
  for (int level : uniq)
    for (Label label : {Label::healthy, Label::lesion})
      for (int k = 0; k < n_per_cell; ++k) out.push_back({id++, label, level});
  return out;
}

/// Generates and writes a balanced dataset; returns the manifest (also written
/// to <out_dir>/manifest.json).
inline json generate_dataset(const GenConfig& cfg, int n_per_cell, const std::vector<int>& levels,
                             const fs::path& out_dir, unsigned threads = 1) {
  cfg.validate();
  const auto layout = dataset_layout(n_per_cell, levels);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  std::vector<json> sidecars(layout.size());
  parallel_for(layout.size(), threads, [&](std::size_t i) {
    const auto& e = layout[i];
    sidecars[i] = save_stack(out_dir, synthesize_stack(cfg, e.stack_id, e.label, e.level));
  });
  std::set<int> uniq(levels.begin(), levels.end());
  json manifest{{"gen", to_json(cfg)},
                {"n_per_cell", n_per_cell},
                {"levels", std::vector<int>(uniq.begin(), uniq.end())},
                {"stacks", sidecars}};
  write_json_file(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace anthro
