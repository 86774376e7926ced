#pragma once

#include <array>
#include <string>
#include <vector>

#include "bbs/tensor.hpp"

namespace bbs::metrics {

struct MetricConfig {
  double beta2 = 0.3;    // precision weight in the F-score
  double s_alpha = 0.5;  // object/region balance in the structure measure
  // Min-max normalize each prediction before thresholding (applies to the
  // F and E curves only; MAE and the structure measure use the raw map).
  bool normalize_pred = true;
};

double mae(const Tensor& pred, const Tensor& gt);

// Structure measure with the usual degenerate rules: empty ground truth
// scores 1 - mean(pred), full ground truth scores mean(pred); otherwise
// alpha * object-similarity + (1-alpha) * region-similarity, clamped to [0,1].
double s_measure(const Tensor& pred, const Tensor& gt, double alpha = 0.5);

// Enhanced-alignment score of one already-binary map.
double e_binary(const Tensor& bin, const Tensor& gt);

// 256-threshold curves (t = k/255, strict pred > t).
struct Curves {
  std::array<double, 256> precision{}, recall{}, f{}, e{};
  double max_f = 0.0, max_e = 0.0;
};

struct MetricReport {
  std::string dataset;
  int64_t n_samples = 0;
  int64_t n_skipped_empty_gt = 0;  // excluded from precision/recall averaging
  double mae = 0.0, s_alpha = 0.0, max_f = 0.0, max_e = 0.0;
  Curves curves;
};

MetricReport evaluate_dataset(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                              const MetricConfig& cfg = {}, const std::string& name = "");

std::string report_json(const MetricReport& r);
std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);

}  // namespace bbs::metrics
