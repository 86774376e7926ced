#include "bbs/tensor.hpp"

#include <cassert>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bbs {

int64_t shape_numel(const std::vector<int64_t>& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

Tensor::Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<int64_t> s, double v) {
  Tensor t(std::move(s));
  t.fill(v);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data[0] = v;
  return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

double& Tensor::at(int64_t c, int64_t h, int64_t w) {
  return data[static_cast<size_t>((c * shape[1] + h) * shape[2] + w)];
}

double Tensor::at(int64_t c, int64_t h, int64_t w) const {
  return data[static_cast<size_t>((c * shape[1] + h) * shape[2] + w)];
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double x : data) s += x;
  return s;
}

double Tensor::mean() const {
  return data.empty() ? 0.0 : sum() / static_cast<double>(data.size());
}

double Tensor::abs_max() const {
  double m = 0.0;
  for (double x : data) m = std::max(m, std::fabs(x));
  return m;
}

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

namespace {
// splitmix64; full-period, passes practical statistical tests, trivially
// seedable.
uint64_t splitmix64(uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace

Rng::Rng(uint64_t seed) : state_(seed ^ 0xD1B54A32D192ED03ull) {
  // Warm up so nearby seeds decorrelate quickly.
  next_u64();
  next_u64();
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int64_t>(next_u64() % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 1e-300) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

uint64_t Rng::mix(uint64_t seed, uint64_t stream) {
  uint64_t x = seed ^ (0x9E3779B97F4A7C15ull * (stream + 1));
  return splitmix64(x);
}

std::vector<LerpTap> bilinear_taps(int64_t in_size, int64_t out_size) {
  std::vector<LerpTap> taps(static_cast<size_t>(out_size));
  double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (int64_t o = 0; o < out_size; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    double limit = static_cast<double>(in_size - 1);
    if (src > limit) src = limit;
    int64_t i0 = static_cast<int64_t>(std::floor(src));
    int64_t i1 = std::min(i0 + 1, in_size - 1);
    taps[static_cast<size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w) {
  if (chw.rank() != 3) throw std::invalid_argument("resize_bilinear: rank-3 CHW tensor expected, got " + shape_str(chw.shape));
  int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const LerpTap& y = ty[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const LerpTap& x = tx[static_cast<size_t>(ox)];
        double top = chw.at(ch, y.i0, x.i0) * (1.0 - x.w1) + chw.at(ch, y.i0, x.i1) * x.w1;
        double bot = chw.at(ch, y.i1, x.i0) * (1.0 - x.w1) + chw.at(ch, y.i1, x.i1) * x.w1;
        out.at(ch, oy, ox) = top * (1.0 - y.w1) + bot * y.w1;
      }
    }
  }
  return out;
}

Tensor resize_nearest(const Tensor& chw, int64_t out_h, int64_t out_w) {
  if (chw.rank() != 3) throw std::invalid_argument("resize_nearest: rank-3 CHW tensor expected, got " + shape_str(chw.shape));
  int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  Tensor out({c, out_h, out_w});
  double sy = static_cast<double>(h) / static_cast<double>(out_h);
  double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (int64_t oy = 0; oy < out_h; ++oy) {
    int64_t iy = std::min<int64_t>(static_cast<int64_t>((static_cast<double>(oy) + 0.5) * sy), h - 1);
    for (int64_t ox = 0; ox < out_w; ++ox) {
      int64_t ix = std::min<int64_t>(static_cast<int64_t>((static_cast<double>(ox) + 0.5) * sx), w - 1);
      for (int64_t ch = 0; ch < c; ++ch) out.at(ch, oy, ox) = chw.at(ch, iy, ix);
    }
  }
  return out;
}

}  // namespace bbs
