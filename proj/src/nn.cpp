#include "bbs/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace bbs::nn {

ad::Var ParamStore::create(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter name '" + name + "'");
  ad::Var v = ad::leaf(std::move(init));
  index_[name] = items_.size();
  items_.emplace_back(name, v);
  return v;
}

ad::Var ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: no parameter named '" + name + "'");
  return items_[it->second].second;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

int64_t ParamStore::scalar_count() const {
  int64_t n = 0;
  for (const auto& [name, v] : items_) n += v->value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (const auto& [name, v] : items_) v->grad.data.clear();
}

Tensor init_conv_weight(Rng& rng, int64_t cout, int64_t cin, int kh, int kw, double gain) {
  Tensor w({cout, cin, kh, kw});
  double std = std::sqrt(gain / static_cast<double>(cin * kh * kw));
  for (double& x : w.data) x = rng.normal() * std;
  return w;
}

Tensor init_linear_weight(Rng& rng, int64_t out, int64_t in) {
  Tensor w({out, in});
  double std = std::sqrt(2.0 / static_cast<double>(in));
  for (double& x : w.data) x = rng.normal() * std;
  return w;
}

Conv2d Conv2d::make(ParamStore& ps, const std::string& name, Rng& rng, int64_t cin, int64_t cout,
                    int k, int stride, int pad, int dilation, bool bias, double gain) {
  Conv2d c;
  if (pad < 0) pad = dilation * (k - 1) / 2;  // same-size default for odd kernels
  c.spec = {stride, pad, dilation};
  c.w = ps.create(name + ".w", init_conv_weight(rng, cout, cin, k, k, gain));
  if (bias) c.b = ps.create(name + ".b", Tensor::zeros({cout}));
  return c;
}

ConvTranspose2d ConvTranspose2d::make(ParamStore& ps, const std::string& name, Rng& rng, int64_t cin,
                                      int64_t cout, int kernel, int stride, double gain) {
  ConvTranspose2d c;
  c.kernel = kernel;
  c.stride = stride;
  Tensor w({cin, cout, kernel, kernel});
  double std = std::sqrt(gain / static_cast<double>(cin * kernel * kernel));
  for (double& x : w.data) x = rng.normal() * std;
  c.w = ps.create(name + ".w", std::move(w));
  c.b = ps.create(name + ".b", Tensor::zeros({cout}));
  return c;
}

Linear Linear::make(ParamStore& ps, const std::string& name, Rng& rng, int64_t in, int64_t out) {
  Linear l;
  l.w = ps.create(name + ".w", init_linear_weight(rng, out, in));
  l.b = ps.create(name + ".b", Tensor::zeros({out}));
  return l;
}

GroupNorm GroupNorm::make(ParamStore& ps, const std::string& name, int64_t channels) {
  GroupNorm g;
  int groups = 1;
  while (groups * 2 <= 8 && channels % (groups * 2) == 0) groups *= 2;
  g.groups = groups;
  g.gamma = ps.create(name + ".g", Tensor::full({channels}, 1.0));
  g.beta = ps.create(name + ".b", Tensor::zeros({channels}));
  return g;
}

ad::Var ChannelAffine::operator()(const ad::Var& x) const {
  return ad::add_channel_bias(ad::mul_channel_gate(x, gamma), beta);
}

ChannelAffine ChannelAffine::make(ParamStore& ps, const std::string& name, int64_t channels) {
  ChannelAffine a;
  a.gamma = ps.create(name + ".g", Tensor::full({channels}, 1.0));
  a.beta = ps.create(name + ".b", Tensor::zeros({channels}));
  return a;
}

}  // namespace bbs::nn
