#include "kronsc/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "kronsc/bench.hpp"
#include "kronsc/errors.hpp"

namespace kronsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<int> hungarian_max(const Matrix& weights) {
  const int n = static_cast<int>(weights.rows());
  if (weights.cols() != n) throw ShapeError("hungarian_max: matrix must be square");
  if (n == 0) return {};
  // Potentials-based O(n^3) assignment on cost = -weight, 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int r = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = -weights(r - 1, c - 1) - u[r] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
  return assignment;
}

double clustering_accuracy(const Labels& pred, const Labels& truth, std::span<const Index> exclude) {
  if (pred.size() != truth.size()) {
    throw LabelDomainError("clustering_accuracy: " + std::to_string(pred.size()) +
                           " predictions for " + std::to_string(truth.size()) + " labels");
  }
  std::vector<char> skip(pred.size(), 0);
  for (Index e : exclude) {
    if (e < 0 || static_cast<std::size_t>(e) >= pred.size()) {
      throw LabelDomainError("clustering_accuracy: excluded index out of range");
    }
    skip[static_cast<std::size_t>(e)] = 1;
  }
  int n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0) throw LabelDomainError("clustering_accuracy: negative label");
    n = std::max({n, pred[i] + 1, truth[i] + 1});
  }
  Matrix confusion = Matrix::Zero(n, n);
  std::size_t counted = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (skip[i]) continue;
    confusion(pred[i], truth[i]) += 1.0;
    ++counted;
  }
  if (counted == 0) throw LabelDomainError("clustering_accuracy: no points to score");
  const auto assignment = hungarian_max(confusion);
  double matched = 0.0;
  for (int r = 0; r < n; ++r) matched += confusion(r, assignment[r]);
  return 100.0 * matched / static_cast<double>(counted);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::krtrr: return "krtrr";
    case Method::krssc: return "krssc";
    case Method::krlrr: return "krlrr";
    case Method::dense_trr: return "dense-trr";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "krtrr") return Method::krtrr;
  if (s == "krssc") return Method::krssc;
  if (s == "krlrr") return Method::krlrr;
  if (s == "dense-trr") return Method::dense_trr;
  throw ConfigError("unknown method '" + s + "' (expected krtrr, krssc, krlrr or dense-trr)");
}

Regularizer regularizer_for(Method m) {
  switch (m) {
    case Method::krssc: return Regularizer::l1;
    case Method::krlrr: return Regularizer::nuclear;
    default: return Regularizer::frobenius;
  }
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(trial) + 1));
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

LabeledData sample_per_class(const LabeledData& pool, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("sample_per_class: per_class must be >= 1");
  int classes = 0;
  for (int l : pool.labels) classes = std::max(classes, l + 1);
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < pool.labels.size(); ++i) {
    by_class[static_cast<std::size_t>(pool.labels[i])].push_back(static_cast<Index>(i));
  }
  std::mt19937_64 rng(seed);
  std::vector<Index> chosen;
  Labels labels;
  for (int c = 0; c < classes; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    if (static_cast<int>(idx.size()) < per_class) {
      throw ConfigError("sample_per_class: class " + std::to_string(c) + " has only " +
                        std::to_string(idx.size()) + " points");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    std::sort(idx.begin(), idx.begin() + per_class);
    for (int i = 0; i < per_class; ++i) {
      chosen.push_back(idx[static_cast<std::size_t>(i)]);
      labels.push_back(c);
    }
  }
  return {select_columns(pool.data, chosen), std::move(labels)};
}

TrialResult run_single(const DataMatrix& x, const Labels& truth, const ExperimentConfig& cfg,
                       std::uint64_t seed) {
  TrialResult out;
  out.seed = seed;
  out.n_points = x.count();
  if (static_cast<Index>(truth.size()) != x.count()) {
    throw ShapeError("run_single: label count does not match point count");
  }

  if (cfg.method == Method::dense_trr) {
    auto t0 = Clock::now();
    Matrix c = dense_baseline_solve(x, cfg.lambda);
    out.timings.solve = seconds_since(t0);
    t0 = Clock::now();
    const double cut = cfg.tau * c.cwiseAbs().maxCoeff();
    c = c.unaryExpr([cut](double v) { return std::abs(v) < cut ? 0.0 : v; });
    out.timings.threshold = seconds_since(t0);
    t0 = Clock::now();
    Matrix w = c.cwiseAbs() + c.cwiseAbs().transpose();
    w.diagonal().setZero();
    const AffinityGraph graph(std::move(w));
    out.timings.affinity = seconds_since(t0);
    out.labels = cluster_affinity(graph, cfg.n_clusters, seed, cfg.cluster, &out.timings);
    out.accuracy = clustering_accuracy(out.labels, truth);
    out.padded_points = x.count();
    return out;
  }

  const ShapePlan plan = plan_factor_shape(x.count(), cfg.k, seed);
  const DataMatrix padded = apply_padding(x, plan.padding);
  out.padded_points = padded.count();

  SolverConfig scfg;
  scfg.regularizer = regularizer_for(cfg.method);
  scfg.lambda = cfg.lambda;
  scfg.shape = plan.shape;
  scfg.max_sweeps = cfg.max_sweeps;
  scfg.rel_tol = cfg.rel_tol;
  scfg.threshold_tau = cfg.tau;
  scfg.system_form = cfg.system_form;
  scfg.seed = seed;

  const ClusterResult res = cluster(padded, scfg, cfg.n_clusters, cfg.cluster);
  out.timings = res.timings;
  out.objective_trace = res.factors.objective_trace;
  out.labels.assign(res.labels.begin(), res.labels.begin() + x.count());
  out.accuracy = clustering_accuracy(out.labels, truth);
  return out;
}

TrialStats run_trials(const ExperimentConfig& cfg, int trials) {
  if (trials < 1) throw ConfigError("run_trials: need at least one trial");
  if (!cfg.source.synthetic && !cfg.source.pool) throw ConfigError("run_trials: no data source");
  TrialStats stats;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t seed = trial_seed(cfg.seed, t);
    TrialResult result;
    result.seed = seed;
    try {
      LabeledData data;
      if (cfg.source.synthetic) {
        SyntheticSpec spec = *cfg.source.synthetic;
        spec.seed = seed;
        data = generate_synthetic(spec);
      } else {
        data = sample_per_class(*cfg.source.pool, cfg.source.per_class, seed);
        data.data = normalize_columns(data.data);
      }
      result = run_single(data.data, data.labels, cfg, seed);
    } catch (const std::exception& e) {
      result.error = e.what();
      ++stats.failures;
    }
    stats.trials.push_back(std::move(result));
  }
  std::vector<double> acc, secs;
  for (const auto& r : stats.trials) {
    if (!r.error.empty()) continue;
    acc.push_back(r.accuracy);
    secs.push_back(r.timings.total());
  }
  std::tie(stats.mean_accuracy, stats.std_accuracy) = mean_std(acc);
  std::tie(stats.mean_seconds, stats.std_seconds) = mean_std(secs);
  return stats;
}

}  // namespace kronsc
