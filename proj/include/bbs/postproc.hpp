#pragma once

#include <string>

#include "bbs/tensor.hpp"

namespace bbs::postproc {

struct BinarizedMap {
  Tensor mask;             // {1,H,W} with values in {0,1}
  double threshold = 0.0;  // in [0,1]
  std::string method;
  bool warned_constant = false;
};

// t = min(2 * mean(S), 1 - 1/255); foreground is S >= t.
BinarizedMap adaptive_threshold(const Tensor& map);

// 256-bin Otsu maximizing between-class variance; ties resolve to the lowest
// threshold; foreground is bin(S) > t. A constant map is a documented special
// case: threshold 0, all-ones mask, warning flag set.
BinarizedMap otsu_threshold(const Tensor& map);

}  // namespace bbs::postproc
