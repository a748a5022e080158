// Copyright 2026 Google LLC
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sls/common.hpp"
#include "sls/datagen.hpp"
#include "sls/trainer.hpp"

namespace sls::io {

// Tensor container: "SLS1" | u32 dtype | u32 rank | u32 dims[rank] | payload,
// all little-endian, row-major. dtype 1 = f32, 2 = f64. A file holds one or
// more tensors back to back.
enum class DType : std::uint32_t { kF32 = 1, kF64 = 2 };

struct Tensor {
  DType dtype = DType::kF64;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;  // f32 payloads are widened on read

  [[nodiscard]] std::size_t element_count() const;
};

std::vector<std::uint8_t> encode_tensors(const std::vector<Tensor>& tensors);
// Throws DataError on a malformed buffer.
std::vector<Tensor> decode_tensors(const std::vector<std::uint8_t>& bytes);
void write_tensors(const std::filesystem::path& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> read_tensors(const std::filesystem::path& path);

// 8-bit PNG. RGB values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const ScalarImage& gray);
RgbImage read_png_rgb(const std::filesystem::path& path);
ScalarImage read_png_gray(const std::filesystem::path& path);
// Cluster ids as a fixed pseudo-random palette.
void write_cluster_png(const std::filesystem::path& path, const ClusterMap& clusters);

// Everything a command can be configured with.
struct RunConfig {
  std::string preset = "medium";
  std::uint64_t gen_seed = 1;
  GenConfig gen = preset_config("medium");
  TrainConfig train;
  bool dump_images = true;
};

struct ConfigKey {
  std::string key;
  std::string doc;
};
// Every accepted key with its documentation, in file order.
const std::vector<ConfigKey>& config_keys();

// Flat "section.key = value" assignments; '#' starts a comment. Throws
// ConfigError on syntax errors.
std::map<std::string, std::string> parse_assignments(const std::string& text);
// Applies assignments on top of `base`. gen.preset is applied first and
// resets gen.* before the remaining keys. Unknown keys and bad values throw
// ConfigError.
RunConfig apply_assignments(RunConfig base, const std::map<std::string, std::string>& kv);
// Lossless text form of every key (doubles use 17 significant digits).
std::string format_config(const RunConfig& cfg);
std::string format_gen_config(const RunConfig& cfg);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Dataset directory: view_####.png, clean_####.png, mask_####.png (0 on
// distractor pixels, 255 elsewhere), feat_####.bin, scene.cfg, seed.txt.
void save_dataset(const std::filesystem::path& dir, const SceneDataset& data,
                  const RunConfig& cfg);
SceneDataset load_dataset(const std::filesystem::path& dir);

// Checkpoint directory: splats.bin, latents.bin, mapper.bin, classifier.bin,
// histogram.bin and state.cfg. Values are stored as f64, so a reload is
// bit-exact.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state);
// Network shapes are rebuilt from the configuration and dataset.
TrainState load_checkpoint(const std::filesystem::path& dir, const SceneDataset& data,
                           const TrainConfig& cfg);

std::string format_log_csv(const TrainLog& log);
std::string format_log_row(const LogRow& row);
TrainLog parse_log_csv(const std::string& text);

}  // namespace sls::io
