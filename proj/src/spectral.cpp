#include "kronsc/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "kronsc/errors.hpp"

namespace kronsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct KMeansRun {
  Labels labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansRun kmeans_once(const Matrix& pts, int n, int max_iter, std::mt19937_64& rng) {
  const Index count = pts.rows();
  const Index dim = pts.cols();
  Matrix centers(n, dim);

  // k-means++ seeding.
  std::uniform_int_distribution<Index> first(0, count - 1);
  centers.row(0) = pts.row(first(rng));
  Vector nearest = (pts.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < n; ++c) {
    const double total = nearest.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick < count - 1; ++pick) {
        target -= nearest[pick];
        if (target <= 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(c) = pts.row(pick);
    nearest = nearest.cwiseMin((pts.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  KMeansRun run;
  run.labels.assign(static_cast<std::size_t>(count), 0);
  Vector dist(count);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (Index i = 0; i < count; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n; ++c) {
        const double d = (pts.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.labels[i] != best) changed = true;
      run.labels[i] = best;
      dist[i] = best_d;
    }
    if (!changed) break;

    Matrix sums = Matrix::Zero(n, dim);
    std::vector<Index> sizes(n, 0);
    for (Index i = 0; i < count; ++i) {
      sums.row(run.labels[i]) += pts.row(i);
      ++sizes[run.labels[i]];
    }
    for (int c = 0; c < n; ++c) {
      if (sizes[c] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its center.
      Index far = 0;
      dist.maxCoeff(&far);
      centers.row(c) = pts.row(far);
      dist[far] = 0.0;
      run.labels[far] = c;
    }
  }

  run.inertia = 0.0;
  for (Index i = 0; i < count; ++i) {
    run.inertia += (pts.row(i) - centers.row(run.labels[i])).squaredNorm();
  }
  return run;
}

}  // namespace

AffinityGraph::AffinityGraph(Matrix w) : w_(std::move(w)) {
  if (w_.rows() != w_.cols()) throw ShapeError("AffinityGraph: matrix must be square");
  require_finite(w_, "AffinityGraph");
  for (Index j = 0; j < w_.cols(); ++j) {
    if (w_(j, j) != 0.0) throw ShapeError("AffinityGraph: diagonal must be zero");
    for (Index i = 0; i < w_.rows(); ++i) {
      if (w_(i, j) < 0.0) throw ShapeError("AffinityGraph: weights must be nonnegative");
      if (std::abs(w_(i, j) - w_(j, i)) > 1e-12) throw ShapeError("AffinityGraph: matrix must be symmetric");
    }
  }
}

AffinityGraph affinity_from_factors(std::span<const Matrix> factors, Index max_n) {
  if (factors.empty()) throw ShapeError("affinity_from_factors: empty factor list");
  Index n = 1;
  for (const auto& f : factors) n *= f.rows();
  if (n > max_n) {
    throw SizeLimitError("affinity_from_factors: N=" + std::to_string(n) +
                         " exceeds the materialization cap " + std::to_string(max_n));
  }
  std::vector<Matrix> abs_factors;
  abs_factors.reserve(factors.size());
  for (const auto& f : factors) abs_factors.push_back(f.cwiseAbs());
  Matrix c = kron_all(abs_factors, std::numeric_limits<std::size_t>::max());
  if (c.rows() != c.cols()) throw ShapeError("affinity_from_factors: factor product is not square");
  Matrix w = c + c.transpose();
  w.diagonal().setZero();
  return AffinityGraph(std::move(w));
}

Matrix laplacian(const AffinityGraph& graph) {
  const Matrix& w = graph.weights();
  const Vector degree = w.rowwise().sum();
  const Vector scale = degree.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
  Matrix l = -(scale.asDiagonal() * w * scale.asDiagonal());
  l.diagonal().array() += 1.0;
  return 0.5 * (l + l.transpose());
}

Matrix spectral_embed(const Matrix& l, Index n, bool normalize_rows) {
  const Index size = l.rows();
  if (l.cols() != size) throw ShapeError("spectral_embed: matrix must be square");
  if (n < 1 || n > size) {
    throw ShapeError("spectral_embed: requested " + std::to_string(n) + " eigenvectors of a " +
                     std::to_string(size) + "x" + std::to_string(size) + " matrix");
  }
  Matrix a = l;
  Vector values(size);
  Matrix vectors(size, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(size), a.data(),
      static_cast<lapack_int>(size), 0.0, 0.0, 1, static_cast<lapack_int>(n), 0.0, &found,
      values.data(), vectors.data(), static_cast<lapack_int>(size), support.data());
  if (info != 0 || found != n) {
    throw ConvergenceError("spectral_embed: symmetric eigensolver failed (info " +
                           std::to_string(info) + ")");
  }
  if (normalize_rows) {
    for (Index i = 0; i < size; ++i) {
      const double len = vectors.row(i).norm();
      if (len > 0.0) vectors.row(i) /= len;
    }
  }
  return vectors;
}

Labels kmeans(const Matrix& v, int n, const KMeansOptions& opts) {
  if (n < 1) throw ConfigError("kmeans: need n >= 1 clusters");
  if (v.rows() == 0) return {};
  if (n == 1) return Labels(static_cast<std::size_t>(v.rows()), 0);
  if (v.rows() < n) throw ShapeError("kmeans: fewer points than clusters");
  KMeansRun best;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    KMeansRun run = kmeans_once(v, n, opts.max_iter, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best.labels;
}

Labels cluster_affinity(const AffinityGraph& w, int n, std::uint64_t seed, const ClusterOptions& opts,
                        StageTimings* timings) {
  StageTimings local;
  auto t0 = Clock::now();
  const Matrix l = laplacian(w);
  local.laplacian = seconds_since(t0);
  t0 = Clock::now();
  const Matrix v = spectral_embed(l, std::min<Index>(n, w.size()), opts.normalize_rows);
  local.embed = seconds_since(t0);
  t0 = Clock::now();
  Labels labels = kmeans(v, n, {opts.kmeans_restarts, 300, seed});
  local.kmeans = seconds_since(t0);
  if (timings) {
    timings->laplacian = local.laplacian;
    timings->embed = local.embed;
    timings->kmeans = local.kmeans;
  }
  return labels;
}

ClusterResult cluster(const DataMatrix& x, const SolverConfig& cfg, int n, const ClusterOptions& opts) {
  if (n < 1) throw ConfigError("cluster: need n >= 1 clusters");
  if (x.count() < n) throw ConfigError("cluster: fewer points than clusters");
  ClusterResult res;
  auto t0 = Clock::now();
  res.factors = solve_factors(x, cfg);
  res.timings.solve = seconds_since(t0);
  t0 = Clock::now();
  const FactorSet thresholded = threshold_factors(res.factors, cfg.threshold_tau);
  res.timings.threshold = seconds_since(t0);
  t0 = Clock::now();
  const AffinityGraph w = affinity_from_factors(thresholded.factors, opts.max_materialize);
  res.timings.affinity = seconds_since(t0);
  res.labels = cluster_affinity(w, n, cfg.seed, opts, &res.timings);
  return res;
}

}  // namespace kronsc
