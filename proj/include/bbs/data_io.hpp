#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bbs/tensor.hpp"

namespace bbs::io {

// One RGB-D training/eval triple, already resampled to a square side.
// rgb is {3,S,S} in [0,1]; depth {1,S,S} min-max normalized to [0,1];
// gt {1,S,S} strictly binary {0,1}.
struct RgbdSample {
  std::string id;
  Tensor rgb, depth, gt;
};

struct DatasetEntry {
  std::string id, rgb_path, depth_path, gt_path;
};

struct DatasetManifest {
  std::string name, root;
  bool invert_depth = false;
  std::vector<DatasetEntry> entries;
};

// Scans root/RGB, root/depth, root/GT and pairs files by stem. Throws on an
// unreadable root or when no complete triple exists; stem mismatches are
// reported per sample via `issues` when provided.
DatasetManifest load_dataset(const std::string& root, const std::string& name = "",
                             bool invert_depth = false, std::vector<std::string>* issues = nullptr);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& json_text);

struct LoadOptions {
  int side = 352;
};
RgbdSample load_sample(const DatasetEntry& e, const LoadOptions& opt, bool invert_depth = false,
                       std::vector<std::string>* warnings = nullptr);

// Per-channel standardization applied when assembling the network input;
// defaults are the customary large-corpus statistics.
struct NormStats {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> stdev{0.229, 0.224, 0.225};
};
Tensor normalize_rgb(const Tensor& rgb01, const NormStats& ns);

// Training split drawn from several manifests: for each source, shuffle by
// seed and take the requested count into the train pool; remainders stay as
// per-source test sets. Duplicate ids across sources are kept but reported.
struct SplitSpec {
  uint64_t seed = 0;
  std::vector<std::pair<std::string, int64_t>> train_counts;  // manifest name -> count
};
struct SplitResult {
  DatasetManifest train;
  std::vector<DatasetManifest> tests;
  std::vector<std::string> warnings;
};
SplitResult materialize_split(const std::vector<DatasetManifest>& sources, const SplitSpec& spec);

// Saliency maps travel as {1,H,W} tensors in [0,1]. Saving resamples to the
// target (ground-truth) resolution and quantizes to 8-bit grayscale PNG, so a
// round trip is exact to 1/255.
void save_saliency(const Tensor& map, const std::string& path, int64_t out_h, int64_t out_w);
Tensor read_saliency(const std::string& path);

// Raw codecs (OpenCV-backed). read returns {C,H,W} in [0,1].
Tensor read_image_chw(const std::string& path);
void write_image_chw(const Tensor& chw01, const std::string& path);

}  // namespace bbs::io
