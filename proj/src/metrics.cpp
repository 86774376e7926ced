#include "bbs/metrics.hpp"

#include <cfloat>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bbs::metrics {

namespace {

constexpr double kPrEps = 1e-12;

void check_pair(const Tensor& pred, const Tensor& gt, const char* who) {
  if (!pred.same_shape(gt))
    throw std::invalid_argument(std::string(who) + ": prediction/ground-truth shape mismatch " +
                                shape_str(pred.shape) + " vs " + shape_str(gt.shape));
}

Tensor minmax(const Tensor& s) {
  double lo = s.data[0], hi = s.data[0];
  for (double v : s.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) return s;
  Tensor out = s;
  for (double& v : out.data) v = (v - lo) / (hi - lo);
  return out;
}

// Index of the highest threshold k (t = k/255) at which value v is still
// predicted foreground under strict v > t; -1 when v is never predicted.
// Computed arithmetically and then corrected against the exact comparison so
// it agrees bit-for-bit with a direct sweep.
int last_active_threshold(double v) {
  int k = static_cast<int>(std::ceil(v * 255.0)) - 1;
  k = std::min(k, 255);
  while (k + 1 <= 255 && v > static_cast<double>(k + 1) / 255.0) ++k;
  while (k >= 0 && !(v > static_cast<double>(k) / 255.0)) --k;
  return k;
}

struct GtStats {
  int64_t fg = 0;
  int64_t n = 0;
  bool empty() const { return fg == 0; }
  bool full() const { return fg == n; }
};

GtStats gt_stats(const Tensor& gt) {
  GtStats st;
  st.n = gt.numel();
  for (double v : gt.data)
    if (v > 0.5) ++st.fg;
  return st;
}

}  // namespace

double mae(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "mae");
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) acc += std::fabs(pred.data[i] - gt.data[i]);
  return acc / static_cast<double>(pred.data.size());
}

namespace {

// Object-level similarity of masked values: 2m/(m^2+1+sd), sample std dev.
double object_term(const Tensor& s, const Tensor& gt, bool foreground) {
  double sum = 0.0, sum2 = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < s.data.size(); ++i) {
    bool in = (gt.data[i] > 0.5) == foreground;
    if (!in) continue;
    double v = foreground ? s.data[i] : 1.0 - s.data[i];
    sum += v;
    sum2 += v * v;
    ++n;
  }
  if (n == 0) return 0.0;
  double m = sum / static_cast<double>(n);
  double sd = 0.0;
  if (n > 1) {
    double var = (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    sd = std::sqrt(std::max(0.0, var));
  }
  return 2.0 * m / (m * m + 1.0 + sd + DBL_EPSILON);
}

double ssim_block(const Tensor& s, const Tensor& gt, int64_t y0, int64_t y1, int64_t x0, int64_t x1) {
  int64_t n = (y1 - y0) * (x1 - x0);
  if (n <= 0) return 0.0;
  double sx = 0.0, sy = 0.0;
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      sx += s.at(0, y, x);
      sy += gt.at(0, y, x) > 0.5 ? 1.0 : 0.0;
    }
  double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (int64_t y = y0; y < y1; ++y)
    for (int64_t x = x0; x < x1; ++x) {
      double dx = s.at(0, y, x) - mx;
      double dy = (gt.at(0, y, x) > 0.5 ? 1.0 : 0.0) - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  double nn = static_cast<double>(n) - 1.0 + DBL_EPSILON;
  vx /= nn;
  vy /= nn;
  cxy /= nn;
  double a = 4.0 * mx * my * cxy;
  double b = (mx * mx + my * my) * (vx + vy);
  if (a != 0.0) return a / (b + DBL_EPSILON);
  return b == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double s_measure(const Tensor& pred, const Tensor& gt, double alpha) {
  check_pair(pred, gt, "s_measure");
  GtStats st = gt_stats(gt);
  if (st.empty()) return 1.0 - pred.mean();
  if (st.full()) return pred.mean();

  double fgmean = static_cast<double>(st.fg) / static_cast<double>(st.n);
  double s_obj = fgmean * object_term(pred, gt, true) + (1.0 - fgmean) * object_term(pred, gt, false);

  int64_t h = gt.dim(1), w = gt.dim(2);
  double cx_acc = 0.0, cy_acc = 0.0;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      if (gt.at(0, y, x) > 0.5) {
        cx_acc += static_cast<double>(x + 1);
        cy_acc += static_cast<double>(y + 1);
      }
  int64_t cx = static_cast<int64_t>(std::llround(cx_acc / static_cast<double>(st.fg)));
  int64_t cy = static_cast<int64_t>(std::llround(cy_acc / static_cast<double>(st.fg)));

  double area = static_cast<double>(h * w);
  double w1 = static_cast<double>(cx * cy) / area;
  double w2 = static_cast<double>((w - cx) * cy) / area;
  double w3 = static_cast<double>(cx * (h - cy)) / area;
  double w4 = 1.0 - w1 - w2 - w3;
  double s_reg = w1 * ssim_block(pred, gt, 0, cy, 0, cx) + w2 * ssim_block(pred, gt, 0, cy, cx, w) +
                 w3 * ssim_block(pred, gt, cy, h, 0, cx) + w4 * ssim_block(pred, gt, cy, h, cx, w);

  double q = alpha * s_obj + (1.0 - alpha) * s_reg;
  return std::clamp(q, 0.0, 1.0);
}

double e_binary(const Tensor& bin, const Tensor& gt) {
  check_pair(bin, gt, "e_binary");
  GtStats st = gt_stats(gt);
  int64_t n = st.n;
  double acc = 0.0;
  if (st.empty()) {
    for (double v : bin.data) acc += 1.0 - v;
  } else if (st.full()) {
    acc = bin.sum();
  } else {
    double mu_f = bin.mean();
    double mu_g = static_cast<double>(st.fg) / static_cast<double>(n);
    for (size_t i = 0; i < bin.data.size(); ++i) {
      double af = bin.data[i] - mu_f;
      double ag = (gt.data[i] > 0.5 ? 1.0 : 0.0) - mu_g;
      double xi = 2.0 * ag * af / (ag * ag + af * af + DBL_EPSILON);
      acc += (xi + 1.0) * (xi + 1.0) / 4.0;
    }
  }
  return std::clamp(acc / (static_cast<double>(n) - 1.0 + DBL_EPSILON), 0.0, 1.0);
}

namespace {

// E score per threshold via foreground/background counts: a binarized map is
// fully described by tp/fp at each threshold, so the alignment sum collapses
// to four closed-form terms.
std::array<double, 256> e_curve_counts(const Tensor& pred, const Tensor& gt, bool normalize) {
  GtStats st = gt_stats(gt);
  int64_t n = st.n;
  Tensor s = normalize ? minmax(pred) : pred;

  // Suffix counts of predicted-foreground pixels split by gt class.
  std::array<int64_t, 257> tp_at{}, fp_at{};
  for (size_t i = 0; i < s.data.size(); ++i) {
    int k = last_active_threshold(s.data[i]);
    if (k < 0) continue;
    if (gt.data[i] > 0.5) ++tp_at[static_cast<size_t>(k)];
    else ++fp_at[static_cast<size_t>(k)];
  }
  std::array<double, 256> out{};
  int64_t tp = 0, fp = 0;
  for (int k = 255; k >= 0; --k) {
    tp += tp_at[static_cast<size_t>(k)];
    fp += fp_at[static_cast<size_t>(k)];
    double acc;
    if (st.empty()) {
      acc = static_cast<double>(n - fp - tp);
    } else if (st.full()) {
      acc = static_cast<double>(tp + fp);
    } else {
      double mu_f = static_cast<double>(tp + fp) / static_cast<double>(n);
      double mu_g = static_cast<double>(st.fg) / static_cast<double>(n);
      auto enh = [&](double f, double g) {
        double af = f - mu_f, ag = g - mu_g;
        double xi = 2.0 * ag * af / (ag * ag + af * af + DBL_EPSILON);
        return (xi + 1.0) * (xi + 1.0) / 4.0;
      };
      acc = static_cast<double>(tp) * enh(1, 1) + static_cast<double>(fp) * enh(1, 0) +
            static_cast<double>(st.fg - tp) * enh(0, 1) + static_cast<double>(n - st.fg - fp) * enh(0, 0);
    }
    out[static_cast<size_t>(k)] = std::clamp(acc / (static_cast<double>(n) - 1.0 + DBL_EPSILON), 0.0, 1.0);
  }
  return out;
}

}  // namespace

MetricReport evaluate_dataset(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                              const MetricConfig& cfg, const std::string& name) {
  if (preds.size() != gts.size() || preds.empty())
    throw std::invalid_argument("evaluate_dataset: need equal, nonzero prediction/gt counts");
  MetricReport r;
  r.dataset = name;
  r.n_samples = static_cast<int64_t>(preds.size());

  std::array<double, 256> psum{}, rsum{}, esum{};
  int64_t pr_used = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    check_pair(preds[i], gts[i], "evaluate_dataset");
    r.mae += mae(preds[i], gts[i]);
    r.s_alpha += s_measure(preds[i], gts[i], cfg.s_alpha);
    auto ec = e_curve_counts(preds[i], gts[i], cfg.normalize_pred);
    for (int k = 0; k < 256; ++k) esum[static_cast<size_t>(k)] += ec[static_cast<size_t>(k)];

    GtStats st = gt_stats(gts[i]);
    if (st.empty()) {
      ++r.n_skipped_empty_gt;
      continue;
    }
    ++pr_used;
    Tensor s = cfg.normalize_pred ? minmax(preds[i]) : preds[i];
    std::array<int64_t, 257> tp_at{}, fp_at{};
    for (size_t j = 0; j < s.data.size(); ++j) {
      int k = last_active_threshold(s.data[j]);
      if (k < 0) continue;
      if (gts[i].data[j] > 0.5) ++tp_at[static_cast<size_t>(k)];
      else ++fp_at[static_cast<size_t>(k)];
    }
    int64_t tp = 0, fp = 0;
    for (int k = 255; k >= 0; --k) {
      tp += tp_at[static_cast<size_t>(k)];
      fp += fp_at[static_cast<size_t>(k)];
      psum[static_cast<size_t>(k)] += static_cast<double>(tp) / (static_cast<double>(tp + fp) + kPrEps);
      rsum[static_cast<size_t>(k)] += static_cast<double>(tp) / (static_cast<double>(st.fg) + kPrEps);
    }
  }

  double inv_n = 1.0 / static_cast<double>(r.n_samples);
  r.mae *= inv_n;
  r.s_alpha *= inv_n;
  for (int k = 0; k < 256; ++k) {
    double e = esum[static_cast<size_t>(k)] * inv_n;
    r.curves.e[static_cast<size_t>(k)] = e;
    r.max_e = std::max(r.max_e, e);
    if (pr_used > 0) {
      double p = psum[static_cast<size_t>(k)] / static_cast<double>(pr_used);
      double rc = rsum[static_cast<size_t>(k)] / static_cast<double>(pr_used);
      double f = (1.0 + cfg.beta2) * p * rc / (cfg.beta2 * p + rc + kPrEps);
      r.curves.precision[static_cast<size_t>(k)] = p;
      r.curves.recall[static_cast<size_t>(k)] = rc;
      r.curves.f[static_cast<size_t>(k)] = f;
      r.max_f = std::max(r.max_f, f);
    }
  }
  r.curves.max_f = r.max_f;
  r.curves.max_e = r.max_e;
  return r;
}

std::string report_json(const MetricReport& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["n_samples"] = r.n_samples;
  j["n_skipped_empty_gt"] = r.n_skipped_empty_gt;
  j["mae"] = r.mae;
  j["s_alpha"] = r.s_alpha;
  j["max_f"] = r.max_f;
  j["max_e"] = r.max_e;
  j["precision"] = r.curves.precision;
  j["recall"] = r.curves.recall;
  return j.dump(2);
}

std::string report_csv_header() { return "dataset,n_samples,n_skipped_empty_gt,mae,s_alpha,max_f,max_e"; }

std::string report_csv_row(const MetricReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << r.dataset << "," << r.n_samples << "," << r.n_skipped_empty_gt << "," << r.mae << ","
     << r.s_alpha << "," << r.max_f << "," << r.max_e;
  return os.str();
}

}  // namespace bbs::metrics
