#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bbs/backbone.hpp"
#include "bbs/data_io.hpp"
#include "bbs/decoder.hpp"
#include "bbs/dem.hpp"

namespace bbs::net {

enum class Variant {
  BBS_RL,      // full model: teachers locate, students refine
  BBS_RH,      // reversed roles
  BBS_NoRF,    // no saliency-guided refinement of the stage-2 group
  Low3,        // single decoder over levels 1-3
  High3,       // single decoder over levels 3-5
  All5,        // single decoder over all levels
  NoCA,        // channel attention stripped from the DEMs
  NoSA,        // spatial attention stripped
  NoPTM,       // plain head + bilinear x4 instead of the transposed head
  SumDecoder,  // 1x1 conv + upsample + sum in place of the cascaded decoder
  Efficient,   // shared backbone via the depth adapter, no transposed head
};
Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);
const std::vector<Variant>& all_variants();

struct ModelConfig {
  Variant variant = Variant::BBS_RL;
  BackboneConfig backbone;
  int dem_ratio = 16;
  int dem_spatial_kernel = 7;
  double loss_alpha = 0.5;
  int64_t side = 352;
  bool zero_depth = false;  // run without the depth branch (features fused as zero)
  uint64_t init_seed = 1;
  io::NormStats norm;
};

struct BbsOutputs {
  Tensor s1, s2;  // maps in [0,1] at the sample's resolution; s1 empty for single-decoder variants
};

// Intermediate handles for tests and invariant checks.
struct ForwardTrace {
  std::array<ad::Var, 5> pyramid;      // fused features per level (null where unused)
  std::vector<ad::Var> stage2_inputs;  // the group fed to the second decoder, refined when applicable
  ad::Var agg1, agg2;                  // decoder outputs (agg1 null for single-decoder variants)
  ad::Var s1_native, s2_native;        // squashed maps at native head resolution
  ad::Var s1, s2;                      // squashed maps at the sample's side
  ad::Var loss_s1, loss_s2, loss;      // null unless gt was supplied
};

// Mean binary cross-entropy of a [0,1] map against a binary mask, clamped to
// [eps, 1-eps]; the training loss is alpha*bce(s1) + (1-alpha)*bce(s2).
double bce(const Tensor& s, const Tensor& g, double eps = 1e-7);
double total_loss(double loss_s1, double loss_s2, double alpha);

class BbsModel {
 public:
  explicit BbsModel(const ModelConfig& cfg);

  // s1_override, when given, replaces the squashed initial map in both the
  // refinement path and the s1 output (test hook for the refinement
  // identities).
  ForwardTrace forward(const io::RgbdSample& sample, const Tensor* gt,
                       const Tensor* s1_override = nullptr);
  BbsOutputs infer(const io::RgbdSample& sample);

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  int64_t param_count() const { return ps_.scalar_count(); }
  const ModelConfig& config() const { return cfg_; }
  bool has_stage1() const { return !single_decoder_; }

  const Backbone* rgb_backbone() const { return rgb_bb_.get(); }
  const Backbone* depth_backbone() const { return depth_bb_; }

 private:
  ModelConfig cfg_;
  nn::ParamStore ps_;
  std::unique_ptr<Backbone> rgb_bb_, depth_bb_owned_;
  Backbone* depth_bb_ = nullptr;  // aliases rgb_bb_ when weights are shared
  std::unique_ptr<Dam> dam_;
  Dem dem_;
  CascadedDecoder cd1_, cd2_;
  HeadT1 t1_, t2_plain_;
  Ptm ptm_;
  bool single_decoder_ = false, refine_ = true, use_ptm_ = true;
  std::vector<size_t> stage1_levels_, stage2_levels_;  // 0-based pyramid indices
};

}  // namespace bbs::net
