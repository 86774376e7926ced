#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "bbs/autodiff.hpp"

namespace bbs::nn {

// Flat, name-addressed parameter registry. Names are hierarchical
// ("decoder2.gcm0.branch1.w") and become the checkpoint tensor table.
class ParamStore {
 public:
  ad::Var create(const std::string& name, Tensor init);
  ad::Var get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, ad::Var>>& items() const { return items_; }
  int64_t scalar_count() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, ad::Var>> items_;
  std::unordered_map<std::string, size_t> index_;
};

// Fan-in-scaled normal initialization; gain 2 suits relu-followed layers,
// gain 1 keeps the variance of purely linear stacks from compounding.
Tensor init_conv_weight(Rng& rng, int64_t cout, int64_t cin, int kh, int kw, double gain = 2.0);
Tensor init_linear_weight(Rng& rng, int64_t out, int64_t in);

struct Conv2d {
  ad::Var w, b;
  ad::ConvSpec spec;
  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b, spec); }
  static Conv2d make(ParamStore& ps, const std::string& name, Rng& rng, int64_t cin, int64_t cout,
                     int k, int stride = 1, int pad = -1, int dilation = 1, bool bias = true,
                     double gain = 2.0);
};

struct ConvTranspose2d {
  ad::Var w, b;
  int kernel = 2, stride = 2;
  ad::Var operator()(const ad::Var& x) const { return ad::conv_transpose2d(x, w, b, kernel, stride); }
  static ConvTranspose2d make(ParamStore& ps, const std::string& name, Rng& rng, int64_t cin, int64_t cout,
                              int kernel = 2, int stride = 2, double gain = 2.0);
};

struct Linear {
  ad::Var w, b;
  ad::Var operator()(const ad::Var& x) const { return ad::linear(x, w, b); }
  static Linear make(ParamStore& ps, const std::string& name, Rng& rng, int64_t in, int64_t out);
};

struct GroupNorm {
  ad::Var gamma, beta;
  int groups = 1;
  double eps = 1e-5;
  ad::Var operator()(const ad::Var& x) const { return ad::group_norm(x, gamma, beta, groups, eps); }
  static GroupNorm make(ParamStore& ps, const std::string& name, int64_t channels);
};

// Per-channel affine standing in for frozen batch-norm statistics in the
// full-scale backbone; weight and bias are the counted parameters.
struct ChannelAffine {
  ad::Var gamma, beta;
  ad::Var operator()(const ad::Var& x) const;
  static ChannelAffine make(ParamStore& ps, const std::string& name, int64_t channels);
};

}  // namespace bbs::nn
