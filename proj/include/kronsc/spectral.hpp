#pragma once

#include <cstdint>
#include <span>

#include "kronsc/data.hpp"
#include "kronsc/kron.hpp"
#include "kronsc/solver.hpp"

namespace kronsc {

inline constexpr Index kDefaultMaxMaterialize = 10000;

/// Symmetric, entrywise nonnegative affinity with an exactly zero diagonal.
class AffinityGraph {
 public:
  /// Validates the invariants; throws ShapeError otherwise.
  explicit AffinityGraph(Matrix w);

  const Matrix& weights() const { return w_; }
  Index size() const { return w_.rows(); }

 private:
  Matrix w_;
};

/// W = |C| + |C|^T with C = kron of the factors, diagonal zeroed. Uses
/// |C_1 (x) C_2| = |C_1| (x) |C_2| so only the absolute factors are combined.
/// Throws SizeLimitError when N exceeds `max_n`.
AffinityGraph affinity_from_factors(std::span<const Matrix> factors,
                                    Index max_n = kDefaultMaxMaterialize);

/// I - D^{-1/2} W D^{-1/2}; zero-degree vertices get a zero scaling.
Matrix laplacian(const AffinityGraph& w);

/// Eigenvectors of the n smallest eigenvalues of the symmetric matrix `l`,
/// one per column. With `normalize_rows` each nonzero row is scaled to unit
/// length.
Matrix spectral_embed(const Matrix& l, Index n, bool normalize_rows = true);

struct KMeansOptions {
  int restarts = 20;
  int max_iter = 300;
  std::uint64_t seed = 0;
};

/// k-means++ seeded Lloyd iterations on the rows of `v`; best of
/// `opts.restarts` runs by within-cluster sum of squares.
Labels kmeans(const Matrix& v, int n, const KMeansOptions& opts = {});

struct StageTimings {
  double solve = 0.0;
  double threshold = 0.0;
  double affinity = 0.0;
  double laplacian = 0.0;
  double embed = 0.0;
  double kmeans = 0.0;

  double total() const { return solve + threshold + affinity + laplacian + embed + kmeans; }
};

struct ClusterOptions {
  Index max_materialize = kDefaultMaxMaterialize;
  bool normalize_rows = true;
  int kmeans_restarts = 20;
};

struct ClusterResult {
  Labels labels;
  FactorSet factors;
  StageTimings timings;
};

/// Full pipeline: factors -> threshold -> affinity -> Laplacian -> embedding
/// -> k-means. k-means is seeded from cfg.seed.
ClusterResult cluster(const DataMatrix& x, const SolverConfig& cfg, int n,
                      const ClusterOptions& opts = {});

/// Spectral stages only, starting from a precomputed affinity.
Labels cluster_affinity(const AffinityGraph& w, int n, std::uint64_t seed,
                        const ClusterOptions& opts = {}, StageTimings* timings = nullptr);

}  // namespace kronsc
