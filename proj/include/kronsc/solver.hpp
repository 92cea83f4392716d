#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kronsc/data.hpp"
#include "kronsc/kron.hpp"

namespace kronsc {

enum class Regularizer { frobenius, l1, nuclear };

/// How the per-row ridge terms are combined into one linear system.
///   exact_sum:       Gram = sum_i H_i^T H_i, Rhs = sum_i H_i^T G_i
///   paper_aggregate: H = sum_i H_i, G = sum_i G_i, Gram = H^T H, Rhs = H^T G
enum class SystemForm { exact_sum, paper_aggregate };

std::string to_string(Regularizer r);
std::string to_string(SystemForm f);
Regularizer parse_regularizer(const std::string& s);
SystemForm parse_system_form(const std::string& s);

struct SolverConfig {
  Regularizer regularizer = Regularizer::frobenius;
  double lambda = 0.2;
  FactorShape shape;
  int max_sweeps = 50;
  double rel_tol = 1e-6;  ///< 0 disables early stopping
  double threshold_tau = 0.1;
  SystemForm system_form = SystemForm::exact_sum;
  int prox_steps = 200;
  double prox_tol = 1e-8;
  std::uint64_t seed = 0;
  /// Scale lambda by the fixed factors' norms so the factor penalty equals the
  /// penalty on the full Kronecker product. Off reproduces a plain per-factor
  /// lambda.
  bool fold_factor_norms = true;

  std::size_t k() const { return shape.k(); }
  /// Throws ConfigError/ShapeError when inconsistent with `n` data points.
  void validate(Index n) const;
};

struct FactorSet {
  std::vector<Matrix> factors;
  std::vector<double> objective_trace;  ///< initial value, then one per sweep
  int sweeps = 0;
  double assembly_seconds = 0.0;  ///< building the ridge systems
  double solve_seconds = 0.0;     ///< linear / proximal solves

  Index rows() const;
  Index cols() const;
};

/// ||X - X (C_1 (x) ... (x) C_k)||_F^2 + lambda * R(C) with R taken from the
/// norm identities (product of squared Frobenius norms, l1 norms or nuclear
/// norms of the factors). C is never formed.
double objective(const DataMatrix& x, std::span<const Matrix> factors, const SolverConfig& cfg);

/// Regularizer value on the implicit product, from the factor norms.
double regularizer_value(std::span<const Matrix> factors, Regularizer r);

/// Per-factor weight when updating factor j with all others fixed.
double effective_lambda(std::span<const Matrix> factors, std::size_t j, const SolverConfig& cfg);

struct RidgeSystem {
  Matrix gram;  ///< p_j x p_j
  Matrix rhs;   ///< p_j x q_j
  /// Constant part of the fidelity term, sum_i ||G_i||_F^2 (exact_sum form).
  double target_sq = 0.0;
};

/// Quadratic in factor j (0-based) with every other factor fixed: the
/// fidelity term equals tr(C_j^T Gram C_j) - 2 tr(C_j^T Rhs) + target_sq for
/// the exact_sum form.
RidgeSystem build_ridge_system(const DataMatrix& x, std::span<const Matrix> factors, std::size_t j,
                               SystemForm form);

/// Closed-form minimizer (Gram + lambda_j I)^{-1} Rhs.
Matrix update_factor_ridge(const DataMatrix& x, std::span<const Matrix> factors, std::size_t j,
                           const SolverConfig& cfg);
Matrix solve_ridge(const RidgeSystem& sys, double lambda_j);

/// Proximal gradient on the factor-j quadratic plus lambda_j times the l1 or
/// nuclear norm. Warm-started from the current factor.
Matrix update_factor_prox(const DataMatrix& x, std::span<const Matrix> factors, std::size_t j,
                          const SolverConfig& cfg);
Matrix solve_prox(const RidgeSystem& sys, const Matrix& start, double lambda_j, Regularizer r,
                  int max_steps, double tol);

/// Entries i.i.d. uniform on [0, N^(-1/k)].
std::vector<Matrix> initial_factors(const FactorShape& shape, std::uint64_t seed);

/// Alternating minimization over the factors, one block update per factor per
/// sweep, until the relative objective decrease drops below rel_tol.
FactorSet solve_factors(const DataMatrix& x, const SolverConfig& cfg);
FactorSet solve_factors(const DataMatrix& x, const SolverConfig& cfg, std::vector<Matrix> start);

/// Zeroes entries below tau * (largest magnitude) within each factor.
FactorSet threshold_factors(const FactorSet& fs, double tau);

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
double largest_eigenvalue(const Matrix& sym, double tol = 1e-10, int max_iter = 10000);

}  // namespace kronsc
