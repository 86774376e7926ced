#include "bbs/dem.hpp"

#include <algorithm>
#include <stdexcept>

namespace bbs::net {

using ad::Var;

DemLevel::DemLevel(nn::ParamStore& ps, const std::string& prefix, int64_t c, int ratio, int spatial_kernel,
                   bool channel_gate, bool spatial_gate, Rng& rng)
    : channels(c), use_channel_gate(channel_gate), use_spatial_gate(spatial_gate) {
  if (use_channel_gate) {
    int64_t hidden = std::max<int64_t>(c / ratio, 1);
    mlp1 = nn::Linear::make(ps, prefix + ".mlp1", rng, c, hidden);
    mlp2 = nn::Linear::make(ps, prefix + ".mlp2", rng, hidden, c);
  }
  if (use_spatial_gate)
    spatial = nn::Conv2d::make(ps, prefix + ".spatial", rng, 1, 1, spatial_kernel);
}

ad::Var DemLevel::channel_attention(const Var& f) const {
  if (!use_channel_gate) return f;
  if (f->value.dim(0) != channels)
    throw std::invalid_argument("dem: channel attention built for " + std::to_string(channels) +
                                " channels, got " + shape_str(f->value.shape));
  Var pooled = ad::global_max_channels(f);
  Var gate = ad::sigmoid(mlp2(ad::relu(mlp1(pooled))));
  return ad::mul_channel_gate(f, gate);
}

ad::Var DemLevel::spatial_attention(const Var& f) const {
  if (!use_spatial_gate) return f;
  Var gate = ad::sigmoid(spatial(ad::max_over_channels(f)));
  return ad::mul_spatial_gate(f, gate);
}

ad::Var DemLevel::enhance(const Var& f) const { return spatial_attention(channel_attention(f)); }

Dem::Dem(nn::ParamStore& ps, const std::string& prefix, const std::vector<int64_t>& level_channels,
         int ratio, int spatial_kernel, bool channel_gate, bool spatial_gate, Rng& rng) {
  for (size_t i = 0; i < level_channels.size(); ++i)
    levels.emplace_back(ps, prefix + ".level" + std::to_string(i + 1), level_channels[i], ratio,
                        spatial_kernel, channel_gate, spatial_gate, rng);
}

ad::Var Dem::fuse(const Var& f_rgb, const Var& f_d, size_t level) const {
  if (level >= levels.size()) throw std::invalid_argument("dem: no such level " + std::to_string(level));
  if (f_rgb->value.shape != f_d->value.shape)
    throw std::invalid_argument("dem: modality shapes differ, " + shape_str(f_rgb->value.shape) + " vs " +
                                shape_str(f_d->value.shape));
  return ad::add(f_rgb, levels[level].enhance(f_d));
}

}  // namespace bbs::net
