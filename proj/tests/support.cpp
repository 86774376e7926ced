#include "support.hpp"

#include <cmath>
#include <unordered_set>

namespace testsup {

bbs::Tensor random_tensor(std::vector<int64_t> shape, bbs::Rng& rng, double lo, double hi) {
  bbs::Tensor t(std::move(shape));
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

GradCheckResult check_gradients(const std::function<bbs::ad::Var()>& loss,
                                const std::vector<std::pair<std::string, bbs::ad::Var>>& leaves,
                                int probes, bbs::Rng& rng, double h) {
  for (auto& [name, v] : leaves) v->grad.data.clear();
  bbs::ad::Var root = loss();
  bbs::ad::backward(root);

  std::vector<bbs::Tensor> analytic;
  analytic.reserve(leaves.size());
  for (auto& [name, v] : leaves) analytic.push_back(v->grad.data.empty() ? bbs::Tensor::zeros(v->value.shape) : v->grad);

  GradCheckResult res;
  for (size_t li = 0; li < leaves.size(); ++li) {
    bbs::ad::Var v = leaves[li].second;
    int64_t n = v->value.numel();
    std::unordered_set<int64_t> picked;
    int want = std::min<int64_t>(probes, n);
    while (static_cast<int>(picked.size()) < want) picked.insert(rng.uniform_int(0, n - 1));
    for (int64_t idx : picked) {
      double orig = v->value.data[static_cast<size_t>(idx)];
      v->value.data[static_cast<size_t>(idx)] = orig + h;
      double lp = loss()->value.data[0];
      v->value.data[static_cast<size_t>(idx)] = orig - h;
      double lm = loss()->value.data[0];
      v->value.data[static_cast<size_t>(idx)] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double err = rel_err(analytic[li].data[static_cast<size_t>(idx)], fd);
      if (err > res.max_rel_err) {
        res.max_rel_err = err;
        res.worst = leaves[li].first + "/" + std::to_string(idx);
      }
    }
  }
  return res;
}

}  // namespace testsup
