#include "bbs/postproc.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace bbs::postproc {

namespace {
void check_map(const Tensor& map, const char* who) {
  if (map.rank() != 3 || map.dim(0) != 1)
    throw std::invalid_argument(std::string(who) + ": want {1,H,W}, got " + shape_str(map.shape));
  for (double v : map.data)
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
      throw std::invalid_argument(std::string(who) + ": map values must lie in [0,1]");
}
}  // namespace

BinarizedMap adaptive_threshold(const Tensor& map) {
  check_map(map, "adaptive_threshold");
  BinarizedMap out;
  out.method = "adaptive";
  out.threshold = std::min(2.0 * map.mean(), 1.0 - 1.0 / 255.0);
  out.mask = Tensor(map.shape);
  for (size_t i = 0; i < map.data.size(); ++i) out.mask.data[i] = map.data[i] >= out.threshold ? 1.0 : 0.0;
  return out;
}

BinarizedMap otsu_threshold(const Tensor& map) {
  check_map(map, "otsu_threshold");
  BinarizedMap out;
  out.method = "otsu";

  std::array<int64_t, 256> hist{};
  for (double v : map.data) {
    int b = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    ++hist[static_cast<size_t>(b)];
  }
  int occupied = 0;
  for (int64_t h : hist)
    if (h > 0) ++occupied;
  if (occupied <= 1) {
    out.threshold = 0.0;
    out.mask = Tensor::full(map.shape, 1.0);
    out.warned_constant = true;
    return out;
  }

  int64_t n = map.numel();
  double total_w = 0.0;
  for (int b = 0; b < 256; ++b) total_w += static_cast<double>(b) * static_cast<double>(hist[static_cast<size_t>(b)]);

  int best_t = 0;
  double best_var = -1.0;
  int64_t n0 = 0;
  double w0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[static_cast<size_t>(t)];
    w0 += static_cast<double>(t) * static_cast<double>(hist[static_cast<size_t>(t)]);
    int64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    double m0 = w0 / static_cast<double>(n0);
    double m1 = (total_w - w0) / static_cast<double>(n1);
    double var = static_cast<double>(n0) * static_cast<double>(n1) * (m0 - m1) * (m0 - m1);
    if (var > best_var + 1e-12) {
      best_var = var;
      best_t = t;
    }
  }
  out.threshold = static_cast<double>(best_t) / 255.0;
  out.mask = Tensor(map.shape);
  for (size_t i = 0; i < map.data.size(); ++i) {
    int b = static_cast<int>(std::lround(std::clamp(map.data[i], 0.0, 1.0) * 255.0));
    out.mask.data[i] = b > best_t ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace bbs::postproc
