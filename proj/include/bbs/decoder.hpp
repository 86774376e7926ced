#pragma once

#include <string>
#include <vector>

#include "bbs/nn.hpp"

namespace bbs::net {

// Four-branch multi-receptive-field context block with a residual projection;
// output width is fixed at 32 regardless of input channels. Branch k in
// {2,3,4} widens its view with a (2k-1) kernel followed by a 3x3 conv at
// dilation (2k-1); branch 1 is a bare 1x1.
struct Gcm {
  Gcm() = default;
  Gcm(nn::ParamStore& ps, const std::string& prefix, int64_t in_c, Rng& rng);
  ad::Var forward(const ad::Var& f) const;

  static constexpr int64_t kOut = 32;
  nn::Conv2d b1, b2a, b2b, b2c, b3a, b3b, b3c, b4a, b4b, b4c, cat, res;
};

// Doubles the spatial side with bilinear steps until it reaches target;
// throws when the ratio is not a power of two.
ad::Var upsample_to(const ad::Var& f, int64_t target_h, int64_t target_w);

// f_i' = f_i * prod_{k>i} Conv(Upsample(f_k)); one conv per (i,k) pair.
// Features are ordered finest (lowest level) first; the last entry passes
// through unchanged.
std::vector<ad::Var> pyramid_multiply(const std::vector<ad::Var>& feats,
                                      const std::vector<std::vector<nn::Conv2d>>& pair_convs);

// From the coarsest level downward: upsample the running map, conv it,
// concatenate with the level's own features, and contract 64->32. Returns a
// 32-channel tensor at the finest resolution.
ad::Var progressive_aggregate(const std::vector<ad::Var>& feats, const std::vector<nn::Conv2d>& up_convs,
                              const std::vector<nn::Conv2d>& cat_convs);

// Initial-map head: 3x3 (32->32) + relu + 3x3 (32->1), returning logits.
struct HeadT1 {
  HeadT1() = default;
  HeadT1(nn::ParamStore& ps, const std::string& prefix, Rng& rng);
  ad::Var logits(const ad::Var& agg) const;
  nn::Conv2d c1, c2;
};

// Progressively transposed x4 upsampling head: two blocks of
// (3x3 conv, then transposed 2x2 stride-2 conv plus a bilinear skip),
// followed by 1x1 convs 32->16->8->1 with relus between. Returns logits at
// 4x the input side.
struct Ptm {
  Ptm() = default;
  Ptm(nn::ParamStore& ps, const std::string& prefix, Rng& rng);
  ad::Var logits(const ad::Var& agg) const;
  nn::Conv2d pre1, pre2, r1, r2, r3;
  nn::ConvTranspose2d up1, up2;
};

// One decoder over one level group. The standard form runs a Gcm per level,
// the multiplicative pyramid refinement, and progressive aggregation; the
// sum-style ablation replaces all of that with per-level 1x1 convs whose
// upsampled outputs are summed.
struct CascadedDecoder {
  CascadedDecoder() = default;
  CascadedDecoder(nn::ParamStore& ps, const std::string& prefix, const std::vector<int64_t>& in_channels,
                  bool sum_style, Rng& rng);
  // feats ordered finest first; returns 32 channels at the finest resolution
  ad::Var forward(const std::vector<ad::Var>& feats) const;

  bool sum_style = false;
  std::vector<Gcm> gcms;
  std::vector<std::vector<nn::Conv2d>> pair_convs;
  std::vector<nn::Conv2d> up_convs, cat_convs;
  std::vector<nn::Conv2d> sum_projs;
};

}  // namespace bbs::net
