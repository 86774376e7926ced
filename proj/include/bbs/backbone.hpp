#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "bbs/nn.hpp"

namespace bbs::net {

// Five side-out feature maps from one stream. For a 352 input the full
// backbone yields sides (88,88,44,22,11) with channels (64,256,512,1024,2048);
// the toy backbone keeps the same side schedule with configurable channels.
struct FeaturePyramid {
  std::array<ad::Var, 5> levels;
  std::string modality;  // "rgb" | "depth" | "cross"
};

// Levels 1-3 are the detail-rich student group, 3-5 the semantic teacher
// group; level 3 belongs to both. Entries alias the pyramid (no copies).
struct BifurcatedGroups {
  std::array<ad::Var, 3> students;
  std::array<ad::Var, 3> teachers;
};
BifurcatedGroups bifurcate(const FeaturePyramid& p);

struct BackboneConfig {
  std::string kind = "toy";  // "toy" | "full"
  bool shared_weights = false;
  bool use_dam = false;
  std::array<int64_t, 5> toy_channels{8, 16, 32, 64, 64};
};

class Backbone {
 public:
  // in_channels is 3 for the rgb (or adapted-depth) stream and 1 for a
  // dedicated depth stream.
  Backbone(nn::ParamStore& ps, const std::string& prefix, const BackboneConfig& cfg, int64_t in_channels,
           Rng& rng);

  FeaturePyramid forward(const ad::Var& x, const std::string& modality) const;

  const std::array<int64_t, 5>& channels() const { return channels_; }
  int64_t in_channels() const { return in_channels_; }

  // Side of each level for a given input side; throws with a padding hint
  // when the side is not divisible by 32.
  static std::array<int64_t, 5> side_schedule(int64_t side);

 private:
  struct ToyStage {
    std::vector<nn::Conv2d> convs;
    std::vector<nn::GroupNorm> norms;
  };
  struct Bottleneck {
    nn::Conv2d c1, c2, c3;
    nn::ChannelAffine a1, a2, a3;
    bool has_down = false;
    nn::Conv2d down;
    nn::ChannelAffine down_a;
  };
  ad::Var run_bottleneck(const Bottleneck& b, const ad::Var& x) const;

  std::string kind_;
  int64_t in_channels_ = 3;
  std::array<int64_t, 5> channels_{};
  std::array<ToyStage, 5> toy_stages_;
  nn::Conv2d stem_;
  nn::ChannelAffine stem_a_;
  std::array<std::vector<Bottleneck>, 4> layers_;
};

// Depth adapter for the shared-weight variant: folds the depth map and the
// rgb/depth difference into a 3-channel image the shared stem accepts.
struct Dam {
  nn::Conv2d dif, d1, d2, out;
  Dam(nn::ParamStore& ps, const std::string& prefix, Rng& rng);
  // rgb {3,H,W}, depth {1,H,W} -> {3,H,W}
  ad::Var forward(const ad::Var& rgb, const ad::Var& depth) const;
};

}  // namespace bbs::net
