#pragma once

#include <string>
#include <vector>

#include "bbs/data_io.hpp"
#include "bbs/metrics.hpp"
#include "bbs/model.hpp"
#include "bbs/trainer.hpp"

namespace bbs::bench {

// Procedural RGB-D corpus with a controllable saliency cue. Both styles
// place one salient object among same-colored decoys, so color alone cannot
// identify the target; depth can (the salient object is the near one).
// Styles invert both the color scheme and the depth convention, giving two
// corpora with a real distribution shift between them:
//   discs — warm soft-edged disc on a cool gradient, near = high depth value
//   rects — cool rectangle on warm stripes, near = low depth value
struct SynthSpec {
  std::string style = "discs";  // "discs" | "rects"
  int n = 16;
  int64_t side = 64;
  uint64_t seed = 1;
  bool informative_depth = true;  // false: depth is uniform noise
  int version = 1;                // stamped into sample ids; bump to invalidate caches
};

std::vector<io::RgbdSample> make_corpus(const SynthSpec& spec);

// Writes RGB/, depth/, GT/ PNG triples so a corpus can round-trip through
// the standard dataset loader.
void write_corpus(const std::vector<io::RgbdSample>& samples, const std::string& root);

metrics::MetricReport evaluate_model(net::BbsModel& model, const std::vector<io::RgbdSample>& data,
                                     const metrics::MetricConfig& mcfg = {}, const std::string& name = "");

struct BenchConfig {
  net::ModelConfig model;
  train::TrainConfig train;
  metrics::MetricConfig metric;
};

struct GridCell {
  double s_alpha = 0.0, max_f = 0.0;
  bool failed = false;
};

struct GridRow {
  std::string train_name;
  std::vector<GridCell> cells;  // one per test set, in column order
  bool failed = false;
  // Self / Mean-Others / Drop, derived from the cells; self is the column
  // whose name equals train_name and drop = (self - mean_others) / self.
  double self_s = 0.0, mean_others_s = 0.0, drop = 0.0;
  bool has_self = false;
};

struct GeneralizationGrid {
  std::vector<std::string> test_names;
  std::vector<GridRow> rows;
};

using NamedCorpus = std::pair<std::string, std::vector<io::RgbdSample>>;

double drop_of(double self, double mean_others);
std::string format_drop_percent(double drop);  // 0.102 -> "10.2%"

void derive_row_stats(GridRow& row, const std::vector<std::string>& test_names);

// One training run per row, all rows sharing the model init seed; evaluation
// of every row model on every test corpus. A diverged or throwing row is
// marked failed and the grid is still returned.
GeneralizationGrid run_grid(const std::vector<NamedCorpus>& train_sets,
                            const std::vector<NamedCorpus>& test_sets, const BenchConfig& cfg);

// Unions of the named corpora ("A+B" rows). Duplicate names inside one union
// are dropped with a warning; a singleton union degenerates to a grid row.
GeneralizationGrid run_combinations(const std::vector<std::vector<std::string>>& unions,
                                    const std::vector<NamedCorpus>& train_sets,
                                    const std::vector<NamedCorpus>& test_sets, const BenchConfig& cfg,
                                    std::vector<std::string>* warnings = nullptr);

struct DepthUtilityReport {
  metrics::MetricReport with_depth, without_depth;
  bool with_failed = false, without_failed = false;
};

// Trains the configured model twice on the same data and seeds, once as
// configured and once depth-blind, and evaluates both on the test corpus.
DepthUtilityReport depth_utility(const std::vector<io::RgbdSample>& train_data,
                                 const std::vector<io::RgbdSample>& test_data, const BenchConfig& cfg);

std::string grid_csv(const GeneralizationGrid& g);
std::string grid_json(const GeneralizationGrid& g);

}  // namespace bbs::bench
