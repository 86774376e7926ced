#pragma once

#include <string>
#include <vector>

#include "bbs/nn.hpp"

namespace bbs::net {

// Depth enhancement for one pyramid level: channel attention (gated MLP over
// the per-channel global max) followed by spatial attention (gated wide conv
// over the channel-wise max), both multiplicative. Either gate can be
// replaced by the identity for the ablation variants.
struct DemLevel {
  DemLevel() = default;
  DemLevel(nn::ParamStore& ps, const std::string& prefix, int64_t channels, int ratio, int spatial_kernel,
           bool channel_gate, bool spatial_gate, Rng& rng);

  ad::Var channel_attention(const ad::Var& f) const;
  ad::Var spatial_attention(const ad::Var& f) const;
  ad::Var enhance(const ad::Var& f) const;  // spatial(channel(f))

  int64_t channels = 0;
  bool use_channel_gate = true, use_spatial_gate = true;
  nn::Linear mlp1, mlp2;
  nn::Conv2d spatial;
};

// One DemLevel per pyramid level, each with independent parameters.
struct Dem {
  Dem() = default;
  Dem(nn::ParamStore& ps, const std::string& prefix, const std::vector<int64_t>& level_channels, int ratio,
      int spatial_kernel, bool channel_gate, bool spatial_gate, Rng& rng);

  // f_cm = f_rgb + enhance(f_d), the cross-modal fusion at one level
  ad::Var fuse(const ad::Var& f_rgb, const ad::Var& f_d, size_t level) const;

  std::vector<DemLevel> levels;
};

}  // namespace bbs::net
