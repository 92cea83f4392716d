#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kronsc/data.hpp"
#include "kronsc/metrics.hpp"
#include "kronsc/solver.hpp"

namespace kronsc {

inline constexpr Index kDefaultBaselineCap = 4096;

/// Dense ridge self-representation C = (X^T X + lambda I)^{-1} X^T X, the
/// O(N^3) reference. Throws SizeLimitError above `cap` points.
Matrix dense_baseline_solve(const DataMatrix& x, double lambda, Index cap = kDefaultBaselineCap);

struct ScalingRow {
  Index n = 0;
  double solve_seconds = 0.0;
  double assembly_seconds = 0.0;
  double total_seconds = 0.0;
};

struct BaselineRow {
  Index n = 0;
  double seconds = 0.0;
};

struct ScalingReport {
  Method method = Method::krtrr;
  int k = 2;
  int sweeps = 5;
  int repetitions = 3;
  std::uint64_t seed = 0;
  double lambda = 0.2;
  std::vector<ScalingRow> rows;
  double slope = 0.0;  ///< least-squares slope of log(total) vs log(N)
  std::vector<BaselineRow> baseline;
  double baseline_slope = 0.0;
};

struct ScalingOptions {
  Method method = Method::krtrr;
  int k = 2;
  double lambda = 0.2;
  int sweeps = 5;
  int repetitions = 3;
  std::uint64_t seed = 0;
  bool include_baseline = true;
  Index baseline_cap = kDefaultBaselineCap;
  /// Baseline sizes; empty means the entries of `sizes` that are <= cap.
  std::vector<Index> baseline_sizes;
};

/// Least-squares slope of log(y) against log(x).
double log_log_slope(std::span<const double> x, std::span<const double> y);

/// Synthetic union-of-subspaces data with exactly n columns (5 subspaces of
/// dimension 6 in R^9).
DataMatrix scaling_data(Index n, std::uint64_t seed);

/// Times a fixed number of solver sweeps per size (median of repetitions) and
/// fits the log-log slope; optionally times the dense baseline too. Sizes must
/// be strictly increasing and must factor into k balanced parts exactly.
ScalingReport scaling_bench(std::span<const Index> sizes, const ScalingOptions& opts);

nlohmann::json to_json(const ScalingReport& r);
nlohmann::json to_json(const TrialStats& s);
void write_scaling_csv(const std::filesystem::path& path, const ScalingReport& r);
void write_trials_csv(const std::filesystem::path& path, const TrialStats& s);

}  // namespace kronsc
