#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kronsc/data.hpp"
#include "kronsc/solver.hpp"
#include "kronsc/spectral.hpp"

namespace kronsc {

/// Maximum-weight perfect matching on a square matrix (Hungarian method).
/// Returns assignment[row] = column.
std::vector<int> hungarian_max(const Matrix& weights);

/// Percentage of points whose predicted cluster maps to their true class
/// under the best one-to-one relabeling. Indices in `exclude` are ignored.
double clustering_accuracy(const Labels& pred, const Labels& truth,
                           std::span<const Index> exclude = {});

enum class Method { krtrr, krssc, krlrr, dense_trr };

std::string to_string(Method m);
Method parse_method(const std::string& s);
Regularizer regularizer_for(Method m);

/// Where trial data comes from: a fresh synthetic draw per trial, or a
/// per-class subsample of a fixed labeled pool.
struct DataSource {
  std::optional<SyntheticSpec> synthetic;
  const LabeledData* pool = nullptr;
  int per_class = 50;
};

struct ExperimentConfig {
  DataSource source;
  Method method = Method::krtrr;
  double lambda = 0.2;
  int k = 2;
  int n_clusters = 5;
  double tau = 0.1;
  SystemForm system_form = SystemForm::exact_sum;
  int max_sweeps = 50;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  ClusterOptions cluster;
};

struct TrialResult {
  double accuracy = 0.0;
  Labels labels;  ///< predictions for the original (unpadded) points
  StageTimings timings;
  std::uint64_t seed = 0;
  Index n_points = 0;
  Index padded_points = 0;
  std::vector<double> objective_trace;
  std::string error;  ///< nonempty when the trial failed
};

struct TrialStats {
  std::vector<TrialResult> trials;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  int failures = 0;
};

/// Per-trial seed derived from the master seed.
std::uint64_t trial_seed(std::uint64_t master, int trial);

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(std::span<const double> xs);

/// One pipeline run on already-loaded data: shape planning with padding,
/// clustering (Kronecker or dense), scoring over the original points only.
TrialResult run_single(const DataMatrix& x, const Labels& truth, const ExperimentConfig& cfg,
                       std::uint64_t seed);

/// Draws data for each trial from the configured source and runs the
/// pipeline. Failed trials are recorded and excluded from the means.
TrialStats run_trials(const ExperimentConfig& cfg, int trials);

/// Picks `per_class` random points of each class from `pool`, grouped by class.
LabeledData sample_per_class(const LabeledData& pool, int per_class, std::uint64_t seed);

}  // namespace kronsc
