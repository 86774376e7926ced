#include "bbs/decoder.hpp"

#include <stdexcept>

namespace bbs::net {

using ad::Var;

Gcm::Gcm(nn::ParamStore& ps, const std::string& prefix, int64_t in_c, Rng& rng) {
  auto conv = [&](const std::string& n, int64_t ci, int64_t co, int k, int dil = 1) {
    return nn::Conv2d::make(ps, prefix + "." + n, rng, ci, co, k, 1, -1, dil, true, 1.0);
  };
  b1 = conv("b1", in_c, kOut, 1);
  b2a = conv("b2a", in_c, kOut, 1);
  b2b = conv("b2b", kOut, kOut, 3);
  b2c = conv("b2c", kOut, kOut, 3, 3);
  b3a = conv("b3a", in_c, kOut, 1);
  b3b = conv("b3b", kOut, kOut, 5);
  b3c = conv("b3c", kOut, kOut, 3, 5);
  b4a = conv("b4a", in_c, kOut, 1);
  b4b = conv("b4b", kOut, kOut, 7);
  b4c = conv("b4c", kOut, kOut, 3, 7);
  cat = conv("cat", 4 * kOut, kOut, 3);
  res = conv("res", in_c, kOut, 1);
}

ad::Var Gcm::forward(const Var& f) const {
  Var o1 = b1(f);
  Var o2 = b2c(b2b(b2a(f)));
  Var o3 = b3c(b3b(b3a(f)));
  Var o4 = b4c(b4b(b4a(f)));
  return ad::add(cat(ad::concat_channels({o1, o2, o3, o4})), res(f));
}

ad::Var upsample_to(const Var& f, int64_t target_h, int64_t target_w) {
  int64_t h = f->value.dim(1), w = f->value.dim(2);
  if (h == target_h && w == target_w) return f;
  int64_t rh = target_h / h, rw = target_w / w;
  if (rh != rw || rh * h != target_h || rw * w != target_w || (rh & (rh - 1)) != 0 || rh < 1)
    throw std::invalid_argument("upsample_to: " + std::to_string(h) + "x" + std::to_string(w) + " -> " +
                                std::to_string(target_h) + "x" + std::to_string(target_w) +
                                " is not a power-of-two upscale");
  Var v = f;
  while (v->value.dim(1) < target_h) v = ad::resize_bilinear(v, v->value.dim(1) * 2, v->value.dim(2) * 2);
  return v;
}

std::vector<ad::Var> pyramid_multiply(const std::vector<Var>& feats,
                                      const std::vector<std::vector<nn::Conv2d>>& pair_convs) {
  size_t n = feats.size();
  if (pair_convs.size() != n)
    throw std::invalid_argument("pyramid_multiply: conv table size mismatch");
  std::vector<Var> out(n);
  out[n - 1] = feats[n - 1];
  for (size_t i = 0; i + 1 < n; ++i) {
    if (pair_convs[i].size() != n - 1 - i)
      throw std::invalid_argument("pyramid_multiply: level " + std::to_string(i) + " wants " +
                                  std::to_string(n - 1 - i) + " pair convs");
    Var acc = feats[i];
    for (size_t k = i + 1; k < n; ++k) {
      Var up = upsample_to(feats[k], feats[i]->value.dim(1), feats[i]->value.dim(2));
      acc = ad::mul(acc, pair_convs[i][k - i - 1](up));
    }
    out[i] = acc;
  }
  return out;
}

ad::Var progressive_aggregate(const std::vector<Var>& feats, const std::vector<nn::Conv2d>& up_convs,
                              const std::vector<nn::Conv2d>& cat_convs) {
  size_t n = feats.size();
  if (n < 2 || up_convs.size() != n - 1 || cat_convs.size() != n - 1)
    throw std::invalid_argument("progressive_aggregate: want n-1 conv pairs for n>=2 levels");
  Var m = feats[n - 1];
  for (size_t step = 0; step < n - 1; ++step) {
    size_t i = n - 2 - step;
    Var t = up_convs[step](upsample_to(m, feats[i]->value.dim(1), feats[i]->value.dim(2)));
    m = cat_convs[step](ad::concat_channels({feats[i], t}));
  }
  return m;
}

HeadT1::HeadT1(nn::ParamStore& ps, const std::string& prefix, Rng& rng)
    : c1(nn::Conv2d::make(ps, prefix + ".c1", rng, 32, 32, 3)),
      c2(nn::Conv2d::make(ps, prefix + ".c2", rng, 32, 1, 3, 1, -1, 1, true, 1.0)) {}

ad::Var HeadT1::logits(const Var& agg) const { return c2(ad::relu(c1(agg))); }

Ptm::Ptm(nn::ParamStore& ps, const std::string& prefix, Rng& rng)
    : pre1(nn::Conv2d::make(ps, prefix + ".pre1", rng, 32, 32, 3, 1, -1, 1, true, 1.0)),
      pre2(nn::Conv2d::make(ps, prefix + ".pre2", rng, 32, 32, 3, 1, -1, 1, true, 1.0)),
      r1(nn::Conv2d::make(ps, prefix + ".r1", rng, 32, 16, 1)),
      r2(nn::Conv2d::make(ps, prefix + ".r2", rng, 16, 8, 1)),
      r3(nn::Conv2d::make(ps, prefix + ".r3", rng, 8, 1, 1, 1, -1, 1, true, 1.0)),
      up1(nn::ConvTranspose2d::make(ps, prefix + ".up1", rng, 32, 32, 2, 2, 1.0)),
      up2(nn::ConvTranspose2d::make(ps, prefix + ".up2", rng, 32, 32, 2, 2, 1.0)) {}

ad::Var Ptm::logits(const Var& agg) const {
  Var h = pre1(agg);
  Var x = ad::add(up1(h), ad::resize_bilinear(h, h->value.dim(1) * 2, h->value.dim(2) * 2));
  h = pre2(x);
  x = ad::add(up2(h), ad::resize_bilinear(h, h->value.dim(1) * 2, h->value.dim(2) * 2));
  return r3(ad::relu(r2(ad::relu(r1(x)))));
}

CascadedDecoder::CascadedDecoder(nn::ParamStore& ps, const std::string& prefix,
                                 const std::vector<int64_t>& in_channels, bool sum, Rng& rng)
    : sum_style(sum) {
  size_t n = in_channels.size();
  if (n < 2) throw std::invalid_argument("decoder: need at least 2 levels");
  if (sum_style) {
    for (size_t i = 0; i < n; ++i)
      sum_projs.push_back(nn::Conv2d::make(ps, prefix + ".proj" + std::to_string(i), rng, in_channels[i],
                                           Gcm::kOut, 1, 1, -1, 1, true, 1.0));
    return;
  }
  for (size_t i = 0; i < n; ++i)
    gcms.emplace_back(ps, prefix + ".gcm" + std::to_string(i), in_channels[i], rng);
  pair_convs.resize(n);
  for (size_t i = 0; i + 1 < n; ++i)
    for (size_t k = i + 1; k < n; ++k)
      pair_convs[i].push_back(nn::Conv2d::make(ps,
                                               prefix + ".pair" + std::to_string(i) + "_" +
                                                   std::to_string(k),
                                               rng, Gcm::kOut, Gcm::kOut, 3, 1, -1, 1, true, 1.0));
  for (size_t s = 0; s + 1 < n; ++s) {
    up_convs.push_back(nn::Conv2d::make(ps, prefix + ".up" + std::to_string(s), rng, Gcm::kOut, Gcm::kOut,
                                        3, 1, -1, 1, true, 1.0));
    cat_convs.push_back(nn::Conv2d::make(ps, prefix + ".cat" + std::to_string(s), rng, 2 * Gcm::kOut,
                                         Gcm::kOut, 3, 1, -1, 1, true, 1.0));
  }
}

ad::Var CascadedDecoder::forward(const std::vector<Var>& feats) const {
  if (sum_style) {
    if (feats.size() != sum_projs.size())
      throw std::invalid_argument("decoder: level count mismatch");
    Var acc;
    int64_t th = feats[0]->value.dim(1), tw = feats[0]->value.dim(2);
    for (size_t i = 0; i < feats.size(); ++i) {
      Var v = upsample_to(sum_projs[i](feats[i]), th, tw);
      acc = acc ? ad::add(acc, v) : v;
    }
    return acc;
  }
  if (feats.size() != gcms.size()) throw std::invalid_argument("decoder: level count mismatch");
  std::vector<Var> ctx(feats.size());
  for (size_t i = 0; i < feats.size(); ++i) ctx[i] = gcms[i].forward(feats[i]);
  return progressive_aggregate(pyramid_multiply(ctx, pair_convs), up_convs, cat_convs);
}

}  // namespace bbs::net
