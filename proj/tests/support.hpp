#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bbs/autodiff.hpp"
#include "bbs/tensor.hpp"

namespace testsup {

bbs::Tensor random_tensor(std::vector<int64_t> shape, bbs::Rng& rng, double lo = -1.0, double hi = 1.0);

double rel_err(double a, double b);

// Central-difference gradient check. `loss` must rebuild the graph from the
// current values of the probed leaves and return the scalar root. Returns the
// worst relative error across `probes` randomly chosen entries per leaf.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "<leaf>/<flat index>"
};
GradCheckResult check_gradients(const std::function<bbs::ad::Var()>& loss,
                                const std::vector<std::pair<std::string, bbs::ad::Var>>& leaves,
                                int probes, bbs::Rng& rng, double h = 1e-5);

}  // namespace testsup
