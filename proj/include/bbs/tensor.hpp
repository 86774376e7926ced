#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bbs {

// Dense row-major tensor of doubles. Rank is small (<= 4) and shapes are
// explicit everywhere; this is a correctness-first CPU substrate.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s);

  static Tensor zeros(std::vector<int64_t> s);
  static Tensor full(std::vector<int64_t> s, double v);
  static Tensor scalar(double v);

  int64_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  // CHW accessors for the common rank-3 case.
  double& at(int64_t c, int64_t h, int64_t w);
  double at(int64_t c, int64_t h, int64_t w) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  void fill(double v);

  double sum() const;
  double mean() const;
  double abs_max() const;
};

std::string shape_str(const std::vector<int64_t>& s);
int64_t shape_numel(const std::vector<int64_t>& s);

// Deterministic RNG with hand-rolled distributions so generated corpora and
// initializations are stable across standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds
  double normal();                     // mean 0, std 1 (Box-Muller)
  bool bernoulli(double p);

  // Derives an independent stream, e.g. per epoch or per sample.
  static uint64_t mix(uint64_t seed, uint64_t stream);

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Resampling shared by the data pipeline and (via the same tables) the
// differentiable resize op. Half-pixel center convention.
struct LerpTap {
  int64_t i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};
std::vector<LerpTap> bilinear_taps(int64_t in_size, int64_t out_size);

Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w);
Tensor resize_nearest(const Tensor& chw, int64_t out_h, int64_t out_w);

}  // namespace bbs
