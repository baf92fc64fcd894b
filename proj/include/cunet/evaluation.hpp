// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_EVALUATION_HPP
#define CUNET_EVALUATION_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cunet/dataset.hpp"
#include "cunet/tensor.hpp"

namespace cunet {

// Least-squares decomposition of an estimate against delayed reference
// spans. References are taken as zero outside their support, so all three
// components have length N + filter_len - 1 and sum to the (padded)
// estimate exactly.
struct BssDecomposition {
  std::vector<double> s_target;
  std::vector<double> e_interf;
  std::vector<double> e_artif;
};

BssDecomposition bss_decompose(const std::vector<double>& estimate,
                               const std::vector<std::vector<double>>& references,
                               int target_index, int filter_len);

struct BssMetrics {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

// dB ratios with denominators floored at 1e-12 * ||s_target||^2 and
// outputs clipped to +100 dB.
BssMetrics metrics(const BssDecomposition& d);

constexpr double kMetricClipDb = 100.0;

struct EvalResult {
  std::string track_id;
  std::string task;
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

// Maps a normalized mixture magnitude patch to the estimated stem
// magnitude patch for a task.
using Separator = std::function<Mat(const Mat& mix_patch, int task_index)>;

// Mixture-as-estimate separator (identity mask), the evaluation baseline.
Mat mixture_baseline_separator(const Mat& mix_patch, int task_index);

// Separates the full track through the patch pipeline, reconstructs audio
// with the mixture phase, and scores against {target stem, accompaniment}.
// Returns nullopt for a silent target stem (undefined metrics).
std::optional<EvalResult> evaluate_track(const std::string& dataset_root,
                                         const std::string& track_id, int task_index,
                                         const std::vector<std::string>& tasks,
                                         const PipelineConfig& pipeline,
                                         const Separator& separator, int filter_len = 512);

struct CorrelationReport {
  double r = 0.0;
  double p_value = 1.0;
  int n_points = 0;
  std::string grouping;  // "global", "task:<name>", "metric:<name>"
};

CorrelationReport pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct CompareOutput {
  CorrelationReport global;
  std::vector<CorrelationReport> per_task;
  std::vector<CorrelationReport> per_metric;
  int dropped_rows = 0;  // rows without a matching (track, task) partner
};

// Pools all (track x task x metric) pairs into the global correlation and
// computes per-task and per-metric breakdowns.
CompareOutput compare_models(const std::vector<EvalResult>& results_a,
                             const std::vector<EvalResult>& results_b);

// Mean +- std (median) per task and metric, plus a pooled Total row.
std::string summary_table(const std::vector<EvalResult>& results, const std::string& title);

void write_results_csv(const std::string& path, const std::vector<EvalResult>& results);
std::vector<EvalResult> read_results_csv(const std::string& path);

}  // namespace cunet

#endif  // CUNET_EVALUATION_HPP
