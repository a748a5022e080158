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

#include "sls/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

namespace sls::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Tensor container

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  T v;
  std::memcpy(&v, raw, sizeof(T));
  return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_tensors(const std::vector<Tensor>& tensors) {
  std::vector<std::uint8_t> out;
  for (const Tensor& t : tensors) {
    if (t.values.size() != t.element_count()) {
      throw std::invalid_argument("encode_tensors: value count does not match dims");
    }
    out.insert(out.end(), {'S', 'L', 'S', '1'});
    put_u32(out, static_cast<std::uint32_t>(t.dtype));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) put_u32(out, d);
    for (double v : t.values) {
      if (t.dtype == DType::kF32) {
        put_le<float>(out, static_cast<float>(v));
      } else {
        put_le<double>(out, v);
      }
    }
  }
  return out;
}

std::vector<Tensor> decode_tensors(const std::vector<std::uint8_t>& bytes) {
  std::vector<Tensor> out;
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw DataError("tensor container: truncated data");
  };
  while (pos < bytes.size()) {
    need(12);
    if (std::memcmp(bytes.data() + pos, "SLS1", 4) != 0) {
      throw DataError("tensor container: bad magic");
    }
    Tensor t;
    const std::uint32_t code = get_u32(bytes.data() + pos + 4);
    if (code != 1 && code != 2) throw DataError("tensor container: unknown dtype " + std::to_string(code));
    t.dtype = static_cast<DType>(code);
    const std::uint32_t rank = get_u32(bytes.data() + pos + 8);
    pos += 12;
    if (rank > 8) throw DataError("tensor container: rank too large");
    need(4ull * rank);
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(get_u32(bytes.data() + pos));
      pos += 4;
      count *= t.dims.back();
      if (count > (1ull << 32)) throw DataError("tensor container: tensor too large");
    }
    const std::size_t width = t.dtype == DType::kF32 ? 4 : 8;
    need(count * width);
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint8_t* p = bytes.data() + pos + i * width;
      t.values[i] = t.dtype == DType::kF32 ? static_cast<double>(get_le<float>(p)) : get_le<double>(p);
    }
    pos += count * width;
    out.push_back(std::move(t));
  }
  return out;
}

void write_tensors(const fs::path& path, const std::vector<Tensor>& tensors) {
  const std::vector<std::uint8_t> bytes = encode_tensors(tensors);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("cannot write " + path.string());
}

std::vector<Tensor> read_tensors(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_tensors(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// PNG

namespace {

void write_png_raw(const fs::path& path, int w, int h, int channels,
                   const std::vector<std::uint8_t>& pixels) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or other variable chunks: identical input gives identical files.
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * w * channels);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::vector<std::uint8_t> read_png_raw(const fs::path& path, int& w, int& h, int channels) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) throw DataError("cannot read " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  std::vector<std::uint8_t> pixels;
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("PNG decoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  if (channels == 3 && is_gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  if (static_cast<int>(png_get_channels(png, info)) != channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("unexpected PNG channel layout in " + path.string());
  }
  pixels.resize(static_cast<std::size_t>(w) * h * channels);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, pixels.data() + static_cast<std::size_t>(y) * w * channels, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return pixels;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const fs::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> px(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) px[3 * i + c] = to_byte(img[i][c]);
  }
  write_png_raw(path, img.width, img.height, 3, px);
}

void write_png(const fs::path& path, const ScalarImage& gray) {
  std::vector<std::uint8_t> px(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) px[i] = to_byte(gray[i]);
  write_png_raw(path, gray.width, gray.height, 1, px);
}

RgbImage read_png_rgb(const fs::path& path) {
  int w = 0, h = 0;
  const auto px = read_png_raw(path, w, h, 3);
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) img[i][c] = px[3 * i + c] / 255.0;
  }
  return img;
}

ScalarImage read_png_gray(const fs::path& path) {
  int w = 0, h = 0;
  const auto px = read_png_raw(path, w, h, 1);
  ScalarImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = px[i] / 255.0;
  return img;
}

void write_cluster_png(const fs::path& path, const ClusterMap& clusters) {
  RgbImage img(clusters.width, clusters.height);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const std::uint64_t hsh = mix64(static_cast<std::uint64_t>(clusters[i]) + 1);
    img[i] = {(hsh & 0xff) / 255.0, ((hsh >> 8) & 0xff) / 255.0, ((hsh >> 16) & 0xff) / 255.0};
  }
  write_png(path, img);
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return d;
}

long long to_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return i;
}

int to_int(const std::string& key, const std::string& v) {
  const long long i = to_integer(key, v);
  if (i < -2147483647LL || i > 2147483647LL) throw ConfigError(key + ": integer out of range");
  return static_cast<int>(i);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  if (v.empty() || v[0] == '-') throw ConfigError(key + ": expected a non-negative integer");
  const unsigned long long i = std::strtoull(v.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}
std::string fmt(bool b) { return b ? "true" : "false"; }
std::string fmt(int i) { return std::to_string(i); }
std::string fmt(std::uint64_t i) { return std::to_string(i); }

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

std::string fmt(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Entry {
  ConfigKey meta;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SLS_DOUBLE(name, field, doc)                                                    \
  Entry {                                                                               \
    {name, doc}, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                                \
  }
#define SLS_INT(name, field, doc)                                                    \
  Entry {                                                                            \
    {name, doc}, [](RunConfig& c, const std::string& v) { c.field = to_int(name, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                             \
  }
#define SLS_BOOL(name, field, doc)                                                    \
  Entry {                                                                             \
    {name, doc}, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                              \
  }
#define SLS_U64(name, field, doc)                                                    \
  Entry {                                                                            \
    {name, doc}, [](RunConfig& c, const std::string& v) { c.field = to_u64(name, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                             \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"gen.preset", "clean|easy|medium|hard|camouflage; resets gen.* first"},
            [](RunConfig& c, const std::string& v) {
              c.gen = preset_config(v);
              c.preset = v;
            },
            [](const RunConfig& c) { return c.preset; }},
      SLS_U64("gen.seed", gen_seed, "dataset seed"),
      SLS_INT("gen.width", gen.width, "image width in pixels"),
      SLS_INT("gen.height", gen.height, "image height in pixels"),
      SLS_INT("gen.num_views", gen.num_views, "number of views"),
      SLS_DOUBLE("gen.occupancy", gen.occupancy, "expected distractor pixel fraction"),
      SLS_INT("gen.persistence", gen.persistence, "views sharing one distractor set"),
      SLS_DOUBLE("gen.jitter", gen.jitter, "per-view gain amplitude per channel"),
      SLS_BOOL("gen.camouflage", gen.camouflage, "mottled distractors drawn from the background"),
      SLS_DOUBLE("gen.camouflage_fraction", gen.camouflage_fraction,
                 "share of camouflaged cells that repeat the local background"),
      SLS_DOUBLE("gen.camouflage_contrast", gen.camouflage_contrast,
                 "max per-channel shift of those cells"),
      SLS_DOUBLE("gen.spatial_bias", gen.spatial_bias,
                 "probability a distractor is centred near the hotspot"),
      SLS_DOUBLE("gen.hotspot_spread", gen.hotspot_spread, "normalised hotspot std-dev"),
      SLS_INT("gen.blobs", gen.blobs, "colour blobs in the base image"),
      SLS_DOUBLE("gen.edge_sharpness", gen.edge_sharpness, "blob boundary sharpness (1 = soft blend)"),
      SLS_INT("gen.feature_dim", gen.feature_dim, "feature channels (1 semantic + appearance)"),
      SLS_DOUBLE("gen.feature_noise_sigma", gen.feature_noise_sigma, "feature noise std-dev"),
      SLS_DOUBLE("gen.semantic_fidelity", gen.semantic_fidelity,
                 "probability a semantic value is correct"),
      SLS_INT("gen.feature_downsample", gen.feature_downsample, "feature resolution divisor"),

      SLS_INT("trainer.steps", train.steps, "optimisation steps"),
      SLS_INT("trainer.splats", train.splats, "initial splat count"),
      SLS_INT("trainer.eval_every", train.eval_every, "steps between evaluations"),
      SLS_U64("trainer.seed", train.seed, "training seed"),
      SLS_BOOL("trainer.mask_before_hist", train.mask_before_hist,
               "mask from the histogram before adding the current residuals"),
      SLS_BOOL("trainer.shuffle", train.shuffle, "seeded per-epoch view order"),
      SLS_BOOL("trainer.dump_images", dump_images, "write render/mask PNGs at each evaluation"),

      Entry{{"mask.mode", "none|trim|robust_filter|sls_agg|sls_mlp"},
            [](RunConfig& c, const std::string& v) { c.train.mode = parse_mask_mode(v); },
            [](const RunConfig& c) { return mask_mode_name(c.train.mode); }},
      SLS_DOUBLE("mask.tau", train.mask.tau, "trim fraction: P(residual > rho) = tau"),
      SLS_DOUBLE("mask.box_threshold", train.mask.box_threshold, "3x3 vote threshold"),
      SLS_INT("mask.patch_size", train.mask.patch_size, "patch tile size"),
      SLS_INT("mask.neighborhood", train.mask.neighborhood, "patch vote window"),
      SLS_DOUBLE("mask.patch_threshold", train.mask.patch_threshold, "patch vote threshold"),
      SLS_DOUBLE("mask.beta1", train.mask.beta1, "warm-up decay per stair"),
      SLS_DOUBLE("mask.beta2", train.mask.beta2, "warm-up stair length"),
      SLS_BOOL("mask.use_smooth", train.mask.use_smooth, "enable the 3x3 stage"),
      SLS_BOOL("mask.use_patch", train.mask.use_patch, "enable the patch stage"),
      SLS_BOOL("mask.patch_override", train.mask.patch_override,
               "patch vote replaces the tile instead of OR-ing"),

      SLS_DOUBLE("hist.discount", train.hist.discount, "population decay per update"),
      SLS_DOUBLE("hist.bucket_width", train.hist.bucket_width, "bucket width"),
      SLS_DOUBLE("hist.max_residual", train.hist.max_residual, "start of the overflow bucket"),

      SLS_INT("sls.clusters", train.sls.clusters, "clusters per view"),
      SLS_DOUBLE("sls.lambda", train.sls.lambda, "Lipschitz penalty weight"),
      SLS_INT("sls.pe_degree", train.sls.pe_degree, "positional encoding degree (0 = off)"),
      Entry{{"sls.hidden", "classifier hidden widths, comma-separated"},
            [](RunConfig& c, const std::string& v) { c.train.sls.hidden = to_int_list("sls.hidden", v); },
            [](const RunConfig& c) { return fmt(c.train.sls.hidden); }},
      SLS_DOUBLE("sls.lr", train.sls.lr, "classifier learning rate"),
      SLS_INT("sls.train_pixels", train.sls.train_pixels, "pixels per classifier step (0 = all)"),
      SLS_DOUBLE("sls.tau_upper", train.sls.tau_upper, "tau of the permissive labels"),
      SLS_DOUBLE("sls.tau_lower", train.sls.tau_lower, "tau of the strict labels"),

      SLS_BOOL("ubp.enabled", train.ubp.enabled, "utilization-based pruning"),
      SLS_INT("ubp.start", train.ubp.start, "first step of the pruning window"),
      SLS_INT("ubp.stop", train.ubp.stop, "end of the pruning window (exclusive)"),
      SLS_INT("ubp.period", train.ubp.period, "steps per utilization window"),
      SLS_DOUBLE("ubp.kappa", train.ubp.kappa, "prune below this windowed utilization"),

      SLS_BOOL("glo.enabled", train.glo.enabled, "per-view appearance"),
      SLS_INT("glo.latent_dim", train.glo.latent_dim, "latent size"),
      SLS_INT("glo.hidden", train.glo.hidden, "mapper hidden width"),

      SLS_DOUBLE("optim.lr_mean", train.optim.lr_mean, "learning rate of splat means"),
      SLS_DOUBLE("optim.lr_scale", train.optim.lr_scale, "learning rate of log-scales"),
      SLS_DOUBLE("optim.lr_rotation", train.optim.lr_rotation, "learning rate of rotations"),
      SLS_DOUBLE("optim.lr_opacity", train.optim.lr_opacity, "learning rate of opacity logits"),
      SLS_DOUBLE("optim.lr_color", train.optim.lr_color, "learning rate of colours"),
      SLS_DOUBLE("optim.lr_glo", train.optim.lr_glo, "learning rate of GLO latents and mapper"),
      SLS_DOUBLE("optim.final_lr_ratio", train.optim.final_lr_ratio,
                 "splat learning-rate multiplier reached at the last step"),

      Entry{{"loss.kernel", "l2|l1|charbonnier|geman_mcclure"},
            [](RunConfig& c, const std::string& v) { c.train.kernel.kind = kernels::parse_kernel_kind(v); },
            [](const RunConfig& c) { return kernels::kernel_kind_name(c.train.kernel.kind); }},
      SLS_DOUBLE("loss.kernel_scale", train.kernel.scale_c, "robust kernel scale c"),
  };
  return table;
}

#undef SLS_DOUBLE
#undef SLS_INT
#undef SLS_BOOL
#undef SLS_U64

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Entry& e : entries()) k.push_back(e.meta);
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> parse_assignments(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

RunConfig apply_assignments(RunConfig base, const std::map<std::string, std::string>& kv) {
  const auto& table = entries();
  for (const auto& [k, v] : kv) {
    const bool known = std::any_of(table.begin(), table.end(), [&](const Entry& e) { return e.meta.key == k; });
    if (!known) throw ConfigError("unknown config key '" + k + "'");
  }
  for (const Entry& e : table) {
    const auto it = kv.find(e.meta.key);
    if (it != kv.end()) e.set(base, it->second);
  }
  return base;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) out += e.meta.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::string format_gen_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) {
    if (e.meta.key.rfind("gen.", 0) == 0) out += e.meta.key + " = " + e.get(cfg) + "\n";
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

std::string numbered(const std::string& prefix, int i, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d%s", prefix.c_str(), i, ext.c_str());
  return buf;
}

}  // namespace

void save_dataset(const fs::path& dir, const SceneDataset& data, const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
  for (const SceneView& v : data.views) {
    write_png(dir / numbered("view", v.id, ".png"), v.image);
    write_png(dir / numbered("clean", v.id, ".png"), v.clean);
    ScalarImage inl(v.gt_mask.width, v.gt_mask.height);
    for (std::size_t i = 0; i < inl.size(); ++i) inl[i] = v.gt_mask[i] > 0.5 ? 0.0 : 1.0;
    write_png(dir / numbered("mask", v.id, ".png"), inl);
    Tensor t;
    t.dtype = DType::kF32;
    t.dims = {static_cast<std::uint32_t>(v.features.height), static_cast<std::uint32_t>(v.features.width),
              static_cast<std::uint32_t>(v.features.channels)};
    t.values = v.features.data;
    write_tensors(dir / numbered("feat", v.id, ".bin"), {t});
  }
  RunConfig scene = cfg;
  scene.gen = data.cfg;
  scene.gen_seed = data.seed;
  write_text(dir / "scene.cfg", format_gen_config(scene));
  write_text(dir / "seed.txt", std::to_string(data.seed) + "\n");
}

SceneDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  RunConfig rc;
  try {
    rc = apply_assignments(rc, parse_assignments(read_text(dir / "scene.cfg")));
  } catch (const ConfigError& e) {
    throw DataError("scene.cfg: " + std::string(e.what()));
  }
  const std::string seed_text = trim(read_text(dir / "seed.txt"));
  SceneDataset ds;
  try {
    ds.seed = to_u64("seed.txt", seed_text);
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  ds.cfg = rc.gen;
  try {
    ds.cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError("scene.cfg: " + std::string(e.what()));
  }
  ds.base = make_base_image(ds.seed, ds.cfg);
  for (int i = 0; i < ds.cfg.num_views; ++i) {
    SceneView v;
    v.id = i;
    v.image = read_png_rgb(dir / numbered("view", i, ".png"));
    v.clean = read_png_rgb(dir / numbered("clean", i, ".png"));
    const ScalarImage inl = read_png_gray(dir / numbered("mask", i, ".png"));
    v.gt_mask = ScalarImage(inl.width, inl.height);
    for (std::size_t p = 0; p < inl.size(); ++p) v.gt_mask[p] = inl[p] < 0.5 ? 1.0 : 0.0;
    const auto ts = read_tensors(dir / numbered("feat", i, ".bin"));
    if (ts.size() != 1 || ts[0].dims.size() != 3) throw DataError("bad feature file for view " + std::to_string(i));
    v.features = FeatureMap(static_cast<int>(ts[0].dims[1]), static_cast<int>(ts[0].dims[0]),
                            static_cast<int>(ts[0].dims[2]));
    v.features.data = ts[0].values;
    if (!v.image.same_shape(ds.cfg.width, ds.cfg.height) || !v.clean.same_shape(v.image) ||
        !v.gt_mask.same_shape(v.image) || v.features.width != ds.cfg.width ||
        v.features.height != ds.cfg.height) {
      throw DataError("view " + std::to_string(i) + " has inconsistent dimensions");
    }
    ds.views.push_back(std::move(v));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::uint32_t kSplatFields = 10;

Tensor vector_tensor(std::span<const double> v) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.values.assign(v.begin(), v.end());
  return t;
}

Tensor single(const fs::path& path) {
  std::vector<Tensor> ts = read_tensors(path);
  if (ts.size() != 1) throw DataError(path.string() + ": expected one tensor");
  return std::move(ts[0]);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainState& state) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
  Tensor splats;
  splats.dims = {static_cast<std::uint32_t>(state.model.splats.size()), kSplatFields};
  for (const Splat& s : state.model.splats) {
    for (int k = 0; k < kSplatParams; ++k) splats.values.push_back(splat_param(s, k));
    splats.values.push_back(s.depth);
  }
  write_tensors(dir / "splats.bin", {splats});

  const auto& lat = state.model.appearance.latents;
  Tensor latents;
  latents.dims = {static_cast<std::uint32_t>(lat.size()),
                  static_cast<std::uint32_t>(lat.empty() ? 0 : lat[0].size())};
  for (const auto& z : lat) latents.values.insert(latents.values.end(), z.begin(), z.end());
  write_tensors(dir / "latents.bin", {latents});
  write_tensors(dir / "mapper.bin", {vector_tensor(state.model.appearance.mapper.params())});
  write_tensors(dir / "classifier.bin", {vector_tensor(state.classifier.params())});
  write_tensors(dir / "histogram.bin", {vector_tensor(state.hist.populations())});
  write_text(dir / "state.cfg", "step = " + std::to_string(state.step) + "\n");
}

TrainState load_checkpoint(const fs::path& dir, const SceneDataset& data, const TrainConfig& cfg) {
  if (!fs::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir.string());
  TrainState st = init_state(data, cfg);
  const auto kv = parse_assignments(read_text(dir / "state.cfg"));
  const auto it = kv.find("step");
  if (it == kv.end()) throw DataError("state.cfg: missing step");
  try {
    st.step = to_int("step", it->second);
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }

  const Tensor s = single(dir / "splats.bin");
  if (s.dims.size() != 2 || s.dims[1] != kSplatFields || s.dims[0] == 0) {
    throw DataError("splats.bin: expected an N x 10 tensor");
  }
  st.model.splats.assign(s.dims[0], Splat{});
  for (std::size_t i = 0; i < st.model.splats.size(); ++i) {
    for (int k = 0; k < kSplatParams; ++k) splat_param(st.model.splats[i], k) = s.values[i * kSplatFields + k];
    st.model.splats[i].depth = s.values[i * kSplatFields + kSplatParams];
  }

  const Tensor lat = single(dir / "latents.bin");
  auto& latents = st.model.appearance.latents;
  if (lat.dims.size() != 2 || lat.dims[0] != latents.size() ||
      (!latents.empty() && lat.dims[1] != latents[0].size())) {
    throw DataError("latents.bin: shape does not match the dataset and configuration");
  }
  for (std::size_t v = 0; v < latents.size(); ++v) {
    for (std::size_t k = 0; k < latents[v].size(); ++k) latents[v][k] = lat.values[v * lat.dims[1] + k];
  }

  auto load_flat = [&](const char* name, std::span<double> dst) {
    const Tensor t = single(dir / name);
    if (t.dims.size() != 1 || t.values.size() != dst.size()) {
      throw DataError(std::string(name) + ": parameter count does not match the configuration");
    }
    std::copy(t.values.begin(), t.values.end(), dst.begin());
  };
  load_flat("mapper.bin", st.model.appearance.mapper.params());
  load_flat("classifier.bin", st.classifier.params());
  const Tensor h = single(dir / "histogram.bin");
  st.hist.set_populations(h.values);
  return st;
}

// ---------------------------------------------------------------------------
// Logs

std::string format_log_row(const LogRow& r) {
  return std::to_string(r.step) + "," + fmt(r.psnr) + "," + fmt(r.loss) + "," + fmt(r.iou) + "," +
         std::to_string(r.splats) + "," + fmt(r.alpha);
}

std::string format_log_csv(const TrainLog& log) {
  std::string out = "step,psnr,loss,iou,splats,alpha\n";
  for (const LogRow& r : log.rows) out += format_log_row(r) + "\n";
  return out;
}

TrainLog parse_log_csv(const std::string& text) {
  TrainLog log;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || trim(line) != "step,psnr,loss,iou,splats,alpha") {
    throw DataError("log.csv: unexpected header");
  }
  while (std::getline(ss, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string item;
    while (std::getline(ls, item, ',')) f.push_back(trim(item));
    if (f.size() != 6) throw DataError("log.csv: expected 6 fields per row");
    try {
      log.rows.push_back({to_int("step", f[0]), to_double("psnr", f[1]), to_double("loss", f[2]),
                          to_double("iou", f[3]), to_int("splats", f[4]), to_double("alpha", f[5])});
    } catch (const ConfigError& e) {
      throw DataError(std::string("log.csv: ") + e.what());
    }
  }
  return log;
}

}  // namespace sls::io
