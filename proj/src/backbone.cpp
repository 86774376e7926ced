#include "bbs/backbone.hpp"

#include <stdexcept>

namespace bbs::net {

using ad::Var;

BifurcatedGroups bifurcate(const FeaturePyramid& p) {
  BifurcatedGroups g;
  g.students = {p.levels[0], p.levels[1], p.levels[2]};
  g.teachers = {p.levels[2], p.levels[3], p.levels[4]};
  return g;
}

std::array<int64_t, 5> Backbone::side_schedule(int64_t side) {
  if (side <= 0 || side % 32 != 0)
    throw std::invalid_argument("backbone: input side " + std::to_string(side) +
                                " is not divisible by 32; pad the image to " +
                                std::to_string((side / 32 + 1) * 32));
  return {side / 4, side / 4, side / 8, side / 16, side / 32};
}

Backbone::Backbone(nn::ParamStore& ps, const std::string& prefix, const BackboneConfig& cfg,
                   int64_t in_channels, Rng& rng)
    : kind_(cfg.kind), in_channels_(in_channels) {
  if (kind_ == "toy") {
    channels_ = cfg.toy_channels;
    int64_t cin = in_channels;
    for (int s = 0; s < 5; ++s) {
      std::string base = prefix + ".stage" + std::to_string(s + 1);
      ToyStage& st = toy_stages_[static_cast<size_t>(s)];
      int64_t cout = channels_[static_cast<size_t>(s)];
      // stage 1 downsamples x4 (two stride-2 convs), stage 2 keeps the side,
      // stages 3-5 halve it
      int n_convs = s == 0 ? 2 : 1;
      int stride = s == 1 ? 1 : 2;
      for (int c = 0; c < n_convs; ++c) {
        st.convs.push_back(nn::Conv2d::make(ps, base + ".conv" + std::to_string(c), rng, cin, cout, 3, stride));
        st.norms.push_back(nn::GroupNorm::make(ps, base + ".norm" + std::to_string(c), cout));
        cin = cout;
      }
    }
  } else if (kind_ == "full") {
    channels_ = {64, 256, 512, 1024, 2048};
    stem_ = nn::Conv2d::make(ps, prefix + ".conv1", rng, in_channels, 64, 7, 2, 3, 1, false);
    stem_a_ = nn::ChannelAffine::make(ps, prefix + ".bn1", 64);
    const int depths[4] = {3, 4, 6, 3};
    const int64_t mids[4] = {64, 128, 256, 512};
    int64_t cin = 64;
    for (int l = 0; l < 4; ++l) {
      int64_t mid = mids[l], cout = mid * 4;
      for (int b = 0; b < depths[l]; ++b) {
        std::string base = prefix + ".layer" + std::to_string(l + 1) + "." + std::to_string(b);
        Bottleneck bl;
        int stride = (b == 0 && l > 0) ? 2 : 1;
        bl.c1 = nn::Conv2d::make(ps, base + ".conv1", rng, cin, mid, 1, 1, 0, 1, false);
        bl.a1 = nn::ChannelAffine::make(ps, base + ".bn1", mid);
        bl.c2 = nn::Conv2d::make(ps, base + ".conv2", rng, mid, mid, 3, stride, 1, 1, false);
        bl.a2 = nn::ChannelAffine::make(ps, base + ".bn2", mid);
        bl.c3 = nn::Conv2d::make(ps, base + ".conv3", rng, mid, cout, 1, 1, 0, 1, false);
        bl.a3 = nn::ChannelAffine::make(ps, base + ".bn3", cout);
        if (b == 0) {
          bl.has_down = true;
          bl.down = nn::Conv2d::make(ps, base + ".down", rng, cin, cout, 1, stride, 0, 1, false);
          bl.down_a = nn::ChannelAffine::make(ps, base + ".down_bn", cout);
        }
        layers_[static_cast<size_t>(l)].push_back(std::move(bl));
        cin = cout;
      }
    }
  } else {
    throw std::invalid_argument("backbone: unknown kind '" + cfg.kind + "' (want toy|full)");
  }
}

ad::Var Backbone::run_bottleneck(const Bottleneck& b, const Var& x) const {
  Var h = ad::relu(b.a1(b.c1(x)));
  h = ad::relu(b.a2(b.c2(h)));
  h = b.a3(b.c3(h));
  Var skip = b.has_down ? b.down_a(b.down(x)) : x;
  return ad::relu(ad::add(h, skip));
}

FeaturePyramid Backbone::forward(const Var& x, const std::string& modality) const {
  if (x->value.rank() != 3 || x->value.dim(0) != in_channels_)
    throw std::invalid_argument("backbone: want {" + std::to_string(in_channels_) + ",H,W}, got " +
                                shape_str(x->value.shape));
  if (x->value.dim(1) != x->value.dim(2))
    throw std::invalid_argument("backbone: non-square input " + shape_str(x->value.shape));
  side_schedule(x->value.dim(1));

  FeaturePyramid p;
  p.modality = modality;
  if (kind_ == "toy") {
    Var h = x;
    for (int s = 0; s < 5; ++s) {
      const ToyStage& st = toy_stages_[static_cast<size_t>(s)];
      for (size_t c = 0; c < st.convs.size(); ++c) h = ad::relu(st.norms[c](st.convs[c](h)));
      p.levels[static_cast<size_t>(s)] = h;
    }
  } else {
    Var h = ad::relu(stem_a_(stem_(x)));
    h = ad::max_pool2d(h, 3, 2, 1);
    p.levels[0] = h;
    for (int l = 0; l < 4; ++l) {
      for (const Bottleneck& b : layers_[static_cast<size_t>(l)]) h = run_bottleneck(b, h);
      p.levels[static_cast<size_t>(l + 1)] = h;
    }
  }
  return p;
}

Dam::Dam(nn::ParamStore& ps, const std::string& prefix, Rng& rng)
    : dif(nn::Conv2d::make(ps, prefix + ".dif", rng, 3, 3, 3, 1, -1, 1, true, 1.0)),
      d1(nn::Conv2d::make(ps, prefix + ".d1", rng, 1, 3, 3, 1, -1, 1, true, 1.0)),
      d2(nn::Conv2d::make(ps, prefix + ".d2", rng, 1, 3, 3, 1, -1, 1, true, 1.0)),
      out(nn::Conv2d::make(ps, prefix + ".out", rng, 3, 3, 3, 1, -1, 1, true, 1.0)) {}

ad::Var Dam::forward(const Var& rgb, const Var& depth) const {
  if (rgb->value.rank() != 3 || rgb->value.dim(0) != 3 || depth->value.rank() != 3 ||
      depth->value.dim(0) != 1 || rgb->value.dim(1) != depth->value.dim(1) ||
      rgb->value.dim(2) != depth->value.dim(2))
    throw std::invalid_argument("dam: want rgb {3,H,W} and depth {1,H,W} with equal H,W, got " +
                                shape_str(rgb->value.shape) + " / " + shape_str(depth->value.shape));
  Var depth3 = ad::broadcast_rows(depth, 3);
  Var i_dif = dif(ad::sub(rgb, depth3));
  return out(ad::add(d1(depth), ad::mul(d2(depth), i_dif)));
}

}  // namespace bbs::net
