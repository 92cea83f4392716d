#include "kronsc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "kronsc/errors.hpp"

namespace kronsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

nlohmann::json timings_json(const StageTimings& t) {
  return {{"solve", t.solve},     {"threshold", t.threshold}, {"affinity", t.affinity},
          {"laplacian", t.laplacian}, {"embed", t.embed},     {"kmeans", t.kmeans},
          {"total", t.total()}};
}

}  // namespace

Matrix dense_baseline_solve(const DataMatrix& x, double lambda, Index cap) {
  if (x.count() > cap) {
    throw SizeLimitError("dense_baseline_solve: N=" + std::to_string(x.count()) +
                         " exceeds the baseline cap " + std::to_string(cap));
  }
  if (!(lambda >= 0.0)) throw ConfigError("dense_baseline_solve: lambda must be >= 0");
  const Matrix& pts = x.points();
  const Index n = pts.cols();
  Matrix gram = Matrix::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(pts.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  Matrix a = gram;
  a.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success || lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (qr.rank() < n) {
      throw RankDeficiencyError("dense_baseline_solve: X^T X + lambda I is singular; use lambda > 0");
    }
    return qr.solve(gram);
  }
  return llt.solve(gram);
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("log_log_slope: need >= 2 paired values");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

DataMatrix scaling_data(Index n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.points_per_subspace = static_cast<int>((n + spec.n_subspaces - 1) / spec.n_subspaces);
  spec.seed = seed;
  const LabeledData full = generate_synthetic(spec);
  return DataMatrix(full.data.points().leftCols(n), true);
}

ScalingReport scaling_bench(std::span<const Index> sizes, const ScalingOptions& opts) {
  if (sizes.empty()) throw ConfigError("scaling_bench: no sizes given");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw ConfigError("scaling_bench: sizes must be strictly increasing");
  }
  if (opts.repetitions < 1 || opts.sweeps < 1) throw ConfigError("scaling_bench: need >= 1 repetition and sweep");
  if (opts.method == Method::dense_trr) throw ConfigError("scaling_bench: method must be a Kronecker method");

  ScalingReport report;
  report.method = opts.method;
  report.k = opts.k;
  report.sweeps = opts.sweeps;
  report.repetitions = opts.repetitions;
  report.seed = opts.seed;
  report.lambda = opts.lambda;

  for (Index n : sizes) {
    const ShapePlan plan = plan_factor_shape(n, opts.k, opts.seed);
    if (plan.padding.padded_count != n) {
      throw ConfigError("scaling_bench: N=" + std::to_string(n) + " has no balanced " +
                        std::to_string(opts.k) + "-factor split (nearest is " +
                        std::to_string(plan.padding.padded_count) + ")");
    }
    const DataMatrix x = scaling_data(n, opts.seed);
    SolverConfig cfg;
    cfg.regularizer = regularizer_for(opts.method);
    cfg.lambda = opts.lambda;
    cfg.shape = plan.shape;
    cfg.max_sweeps = opts.sweeps;
    cfg.rel_tol = 0.0;  // time exactly `sweeps` sweeps
    cfg.seed = opts.seed;
    std::vector<double> solve, assembly, total;
    for (int r = 0; r < opts.repetitions; ++r) {
      const auto t0 = Clock::now();
      const FactorSet fs = solve_factors(x, cfg);
      total.push_back(seconds_since(t0));
      solve.push_back(fs.solve_seconds);
      assembly.push_back(fs.assembly_seconds);
    }
    report.rows.push_back({n, median(solve), median(assembly), median(total)});
  }
  std::vector<double> ns, ts;
  for (const auto& r : report.rows) {
    ns.push_back(static_cast<double>(r.n));
    ts.push_back(r.total_seconds);
  }
  if (ns.size() >= 2) report.slope = log_log_slope(ns, ts);

  if (opts.include_baseline) {
    std::vector<Index> bsizes = opts.baseline_sizes;
    if (bsizes.empty()) {
      for (Index n : sizes) {
        if (n <= opts.baseline_cap) bsizes.push_back(n);
      }
    }
    for (Index n : bsizes) {
      if (n > opts.baseline_cap) continue;
      const DataMatrix x = scaling_data(n, opts.seed);
      std::vector<double> times;
      for (int r = 0; r < opts.repetitions; ++r) {
        const auto t0 = Clock::now();
        const Matrix c = dense_baseline_solve(x, opts.lambda, opts.baseline_cap);
        times.push_back(seconds_since(t0));
        if (!c.allFinite()) throw DivergenceError("dense baseline produced non-finite values");
      }
      report.baseline.push_back({n, median(times)});
    }
    std::vector<double> bn, bt;
    for (const auto& b : report.baseline) {
      bn.push_back(static_cast<double>(b.n));
      bt.push_back(b.seconds);
    }
    if (bn.size() >= 2) report.baseline_slope = log_log_slope(bn, bt);
  }
  return report;
}

nlohmann::json to_json(const ScalingReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"solve_seconds", row.solve_seconds},
                    {"assembly_seconds", row.assembly_seconds},
                    {"total_seconds", row.total_seconds}});
  }
  nlohmann::json base = nlohmann::json::array();
  for (const auto& b : r.baseline) base.push_back({{"n", b.n}, {"seconds", b.seconds}});
  return {{"method", to_string(r.method)},
          {"k", r.k},
          {"sweeps", r.sweeps},
          {"repetitions", r.repetitions},
          {"seed", r.seed},
          {"lambda", r.lambda},
          {"rows", rows},
          {"slope", r.slope},
          {"baseline", base},
          {"baseline_slope", r.baseline_slope}};
}

nlohmann::json to_json(const TrialStats& s) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : s.trials) {
    nlohmann::json j = {{"seed", t.seed},
                        {"accuracy", t.accuracy},
                        {"n_points", t.n_points},
                        {"padded_points", t.padded_points},
                        {"timings", timings_json(t.timings)},
                        {"objective_trace", t.objective_trace}};
    if (!t.error.empty()) j["error"] = t.error;
    trials.push_back(std::move(j));
  }
  return {{"trials", trials},
          {"mean_accuracy", s.mean_accuracy},
          {"std_accuracy", s.std_accuracy},
          {"mean_seconds", s.mean_seconds},
          {"std_seconds", s.std_seconds},
          {"failures", s.failures}};
}

void write_scaling_csv(const std::filesystem::path& path, const ScalingReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "method,k,n,solve_seconds,assembly_seconds,total_seconds,baseline_seconds\n";
  for (const auto& row : r.rows) {
    out << to_string(r.method) << ',' << r.k << ',' << row.n << ',' << row.solve_seconds << ','
        << row.assembly_seconds << ',' << row.total_seconds << ',';
    const auto it = std::find_if(r.baseline.begin(), r.baseline.end(),
                                 [&](const BaselineRow& b) { return b.n == row.n; });
    if (it != r.baseline.end()) out << it->seconds;
    out << '\n';
  }
}

void write_trials_csv(const std::filesystem::path& path, const TrialStats& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "trial,seed,accuracy,total_seconds,solve_seconds,error\n";
  for (std::size_t i = 0; i < s.trials.size(); ++i) {
    const auto& t = s.trials[i];
    out << i << ',' << t.seed << ',' << t.accuracy << ',' << t.timings.total() << ','
        << t.timings.solve << ',' << (t.error.empty() ? "" : "\"" + t.error + "\"") << '\n';
  }
}

}  // namespace kronsc
