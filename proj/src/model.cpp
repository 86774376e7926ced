#include "bbs/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>

namespace bbs::net {

using ad::Var;

Variant variant_from_string(const std::string& s) {
  for (Variant v : all_variants())
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::BBS_RL: return "BBS_RL";
    case Variant::BBS_RH: return "BBS_RH";
    case Variant::BBS_NoRF: return "BBS_NoRF";
    case Variant::Low3: return "Low3";
    case Variant::High3: return "High3";
    case Variant::All5: return "All5";
    case Variant::NoCA: return "NoCA";
    case Variant::NoSA: return "NoSA";
    case Variant::NoPTM: return "NoPTM";
    case Variant::SumDecoder: return "SumDecoder";
    case Variant::Efficient: return "Efficient";
  }
  throw std::invalid_argument("bad variant enum");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::BBS_RL,  Variant::BBS_RH, Variant::BBS_NoRF,
                                      Variant::Low3,    Variant::High3,  Variant::All5,
                                      Variant::NoCA,    Variant::NoSA,   Variant::NoPTM,
                                      Variant::SumDecoder, Variant::Efficient};
  return v;
}

double bce(const Tensor& s, const Tensor& g, double eps) {
  ad::NoGradGuard ng;
  return ad::bce_mean(ad::constant(s), g, eps)->value.data[0];
}

double total_loss(double loss_s1, double loss_s2, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("total_loss: alpha " + std::to_string(alpha) + " outside [0,1]");
  return alpha * loss_s1 + (1.0 - alpha) * loss_s2;
}

BbsModel::BbsModel(const ModelConfig& cfg) : cfg_(cfg) {
  if (!(cfg.loss_alpha >= 0.0 && cfg.loss_alpha <= 1.0))
    throw std::invalid_argument("model: loss_alpha " + std::to_string(cfg.loss_alpha) + " outside [0,1]");
  Backbone::side_schedule(cfg.side);

  BackboneConfig bb = cfg.backbone;
  bool sum_style = false;
  switch (cfg.variant) {
    case Variant::BBS_RL:
    case Variant::NoCA:
    case Variant::NoSA:
    case Variant::NoPTM:
      stage1_levels_ = {2, 3, 4};
      stage2_levels_ = {0, 1, 2};
      break;
    case Variant::SumDecoder:
      stage1_levels_ = {2, 3, 4};
      stage2_levels_ = {0, 1, 2};
      sum_style = true;
      break;
    case Variant::BBS_RH:
      stage1_levels_ = {0, 1, 2};
      stage2_levels_ = {2, 3, 4};
      break;
    case Variant::BBS_NoRF:
      stage1_levels_ = {2, 3, 4};
      stage2_levels_ = {0, 1, 2};
      refine_ = false;
      break;
    case Variant::Low3:
      stage2_levels_ = {0, 1, 2};
      single_decoder_ = true;
      break;
    case Variant::High3:
      stage2_levels_ = {2, 3, 4};
      single_decoder_ = true;
      break;
    case Variant::All5:
      stage2_levels_ = {0, 1, 2, 3, 4};
      single_decoder_ = true;
      break;
    case Variant::Efficient:
      stage1_levels_ = {2, 3, 4};
      stage2_levels_ = {0, 1, 2};
      bb.shared_weights = true;
      bb.use_dam = true;
      use_ptm_ = false;
      break;
  }
  if (cfg.variant == Variant::NoPTM) use_ptm_ = false;
  if (bb.shared_weights && !bb.use_dam)
    std::cerr << "model: shared backbone weights without the depth adapter is untested territory\n";

  Rng rng(Rng::mix(cfg.init_seed, 0x6262736e65740001ull));
  rgb_bb_ = std::make_unique<Backbone>(ps_, "rgb", bb, 3, rng);
  if (!cfg.zero_depth) {
    if (bb.shared_weights) {
      depth_bb_ = rgb_bb_.get();
      if (bb.use_dam) dam_ = std::make_unique<Dam>(ps_, "dam", rng);
    } else {
      depth_bb_owned_ = std::make_unique<Backbone>(ps_, "depth", bb, 1, rng);
      depth_bb_ = depth_bb_owned_.get();
    }
  }

  std::set<size_t> used(stage2_levels_.begin(), stage2_levels_.end());
  used.insert(stage1_levels_.begin(), stage1_levels_.end());
  if (!cfg.zero_depth) {
    std::vector<int64_t> dem_channels;
    for (size_t lv : used) dem_channels.push_back(rgb_bb_->channels()[lv]);
    bool ca = cfg.variant != Variant::NoCA, sa = cfg.variant != Variant::NoSA;
    dem_ = Dem(ps_, "dem", dem_channels, cfg.dem_ratio, cfg.dem_spatial_kernel, ca, sa, rng);
  }

  auto fused_channels = [&](const std::vector<size_t>& levels) {
    std::vector<int64_t> c;
    for (size_t lv : levels) c.push_back(rgb_bb_->channels()[lv]);
    return c;
  };

  if (!single_decoder_) {
    cd1_ = CascadedDecoder(ps_, "decoder1", fused_channels(stage1_levels_), sum_style, rng);
    t1_ = HeadT1(ps_, "head1", rng);
  }
  cd2_ = CascadedDecoder(ps_, "decoder2", fused_channels(stage2_levels_), sum_style, rng);
  if (use_ptm_)
    ptm_ = Ptm(ps_, "head2", rng);
  else
    t2_plain_ = HeadT1(ps_, "head2", rng);
}

ForwardTrace BbsModel::forward(const io::RgbdSample& sample, const Tensor* gt,
                               const Tensor* s1_override) {
  int64_t side = sample.rgb.dim(1);
  if (sample.rgb.rank() != 3 || sample.rgb.dim(0) != 3 || sample.rgb.dim(2) != side)
    throw std::invalid_argument("model: rgb must be {3,S,S}, got " + shape_str(sample.rgb.shape));

  ForwardTrace tr;
  Var rgb = ad::constant(io::normalize_rgb(sample.rgb, cfg_.norm));
  FeaturePyramid rgb_pyr = rgb_bb_->forward(rgb, "rgb");

  std::set<size_t> used(stage2_levels_.begin(), stage2_levels_.end());
  used.insert(stage1_levels_.begin(), stage1_levels_.end());

  if (cfg_.zero_depth) {
    for (size_t lv : used) tr.pyramid[lv] = rgb_pyr.levels[lv];
  } else {
    if (sample.depth.rank() != 3 || sample.depth.dim(0) != 1)
      throw std::invalid_argument("model: depth must be {1,S,S}, got " + shape_str(sample.depth.shape));
    Var depth = ad::constant(sample.depth);
    FeaturePyramid d_pyr = dam_ ? depth_bb_->forward(dam_->forward(rgb, depth), "depth")
                                : depth_bb_->forward(depth, "depth");
    size_t slot = 0;
    for (size_t lv : used) {
      tr.pyramid[lv] = dem_.fuse(rgb_pyr.levels[lv], d_pyr.levels[lv], slot);
      ++slot;
    }
  }

  auto gather = [&](const std::vector<size_t>& levels) {
    std::vector<Var> g;
    for (size_t lv : levels) g.push_back(tr.pyramid[lv]);
    return g;
  };

  Var s1_gate;
  if (!single_decoder_) {
    tr.agg1 = cd1_.forward(gather(stage1_levels_));
    tr.s1_native = ad::sigmoid(t1_.logits(tr.agg1));
    s1_gate = s1_override ? ad::constant(*s1_override) : tr.s1_native;
    tr.s1 = ad::resize_bilinear(s1_gate, side, side);
  }

  tr.stage2_inputs = gather(stage2_levels_);
  if (refine_ && !single_decoder_) {
    for (Var& f : tr.stage2_inputs) {
      Var s1r = ad::resize_bilinear(s1_gate, f->value.dim(1), f->value.dim(2));
      f = ad::add(f, ad::mul_spatial_gate(f, s1r));
    }
  }

  tr.agg2 = cd2_.forward(tr.stage2_inputs);
  Var s2_logits = use_ptm_ ? ptm_.logits(tr.agg2) : t2_plain_.logits(tr.agg2);
  tr.s2_native = ad::sigmoid(s2_logits);
  tr.s2 = ad::resize_bilinear(tr.s2_native, side, side);

  if (gt) {
    if (gt->shape != tr.s2->value.shape)
      throw std::invalid_argument("model: gt shape " + shape_str(gt->shape) + " does not match output " +
                                  shape_str(tr.s2->value.shape));
    tr.loss_s2 = ad::bce_mean(tr.s2, *gt, 1e-7);
    if (tr.s1) {
      tr.loss_s1 = ad::bce_mean(tr.s1, *gt, 1e-7);
      tr.loss = ad::add(ad::scale(tr.loss_s1, cfg_.loss_alpha), ad::scale(tr.loss_s2, 1.0 - cfg_.loss_alpha));
    } else {
      tr.loss_s1 = ad::constant(Tensor::scalar(0.0));
      tr.loss = tr.loss_s2;
    }
  }
  return tr;
}

BbsOutputs BbsModel::infer(const io::RgbdSample& sample) {
  ad::NoGradGuard ng;
  ForwardTrace tr = forward(sample, nullptr);
  BbsOutputs out;
  if (tr.s1) out.s1 = tr.s1->value;
  out.s2 = tr.s2->value;
  return out;
}

}  // namespace bbs::net
