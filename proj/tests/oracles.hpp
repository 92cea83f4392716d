#pragma once

// Brute-force references that materialize C = C_1 (x) ... (x) C_k.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "kronsc/kron.hpp"
#include "kronsc/solver.hpp"

namespace kronsc::testing {

inline double materialized_penalty(std::span<const Matrix> factors, Regularizer r) {
  const Matrix c = kron_all(factors);
  switch (r) {
    case Regularizer::frobenius: return c.squaredNorm();
    case Regularizer::l1: return c.cwiseAbs().sum();
    case Regularizer::nuclear: return Eigen::JacobiSVD<Matrix>(c).singularValues().sum();
  }
  return 0.0;
}

inline double materialized_objective(const Matrix& x, std::span<const Matrix> factors, double lambda,
                                     Regularizer r) {
  const Matrix c = kron_all(factors);
  return (x - x * c).squaredNorm() + lambda * materialized_penalty(factors, r);
}

/// Operator M with vec(X (C_1 (x) ... (x) C_k)) = M vec(C_j), built column by
/// column from unit matrices (the map is linear in C_j).
inline Matrix fidelity_operator(const Matrix& x, std::vector<Matrix> factors, std::size_t j) {
  const Index p = factors[j].rows(), q = factors[j].cols();
  Matrix m(x.size(), p * q);
  for (Index col = 0; col < p * q; ++col) {
    factors[j] = Matrix::Zero(p, q);
    factors[j](col % p, col / p) = 1.0;
    const Matrix xc = x * kron_all(factors);
    m.col(col) = Eigen::Map<const Vector>(xc.data(), xc.size());
  }
  return m;
}

/// argmin_c ||vec(X) - M c||^2 + lambda_j ||c||^2 by dense normal equations.
inline Matrix dense_ridge_factor(const Matrix& x, const std::vector<Matrix>& factors, std::size_t j,
                                 double lambda_j) {
  const Matrix m = fidelity_operator(x, factors, j);
  const Vector y = Eigen::Map<const Vector>(x.data(), x.size());
  const Matrix a = m.transpose() * m + lambda_j * Matrix::Identity(m.cols(), m.cols());
  const Vector c = a.colPivHouseholderQr().solve(m.transpose() * y);
  return unvec(c, factors[j].rows(), factors[j].cols());
}

inline Matrix soft_threshold(const Matrix& v, double t) {
  return v.unaryExpr([t](double e) { return e > t ? e - t : (e < -t ? e + t : 0.0); });
}

inline Matrix singular_value_threshold(const Matrix& v, double t) {
  Eigen::JacobiSVD<Matrix> svd(v, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - t, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Plain ISTA on ||vec(X) - M c||^2 + lambda_j R(C_j) for `iters` steps from zero.
inline Matrix ista_factor(const Matrix& x, const std::vector<Matrix>& factors, std::size_t j,
                          double lambda_j, Regularizer r, int iters) {
  const Matrix m = fidelity_operator(x, factors, j);
  const Vector y = Eigen::Map<const Vector>(x.data(), x.size());
  const Matrix mtm = m.transpose() * m;
  const Vector mty = m.transpose() * y;
  const double lip = 2.0 * Eigen::SelfAdjointEigenSolver<Matrix>(mtm).eigenvalues().maxCoeff();
  const double step = 1.0 / lip;
  const Index p = factors[j].rows(), q = factors[j].cols();
  Matrix c = Matrix::Zero(p, q);
  for (int it = 0; it < iters; ++it) {
    const Vector g = 2.0 * (mtm * vec(c) - mty);
    const Matrix v = c - step * unvec(g, p, q);
    c = r == Regularizer::l1 ? soft_threshold(v, step * lambda_j)
                             : singular_value_threshold(v, step * lambda_j);
  }
  return c;
}

/// Gradient descent with Armijo backtracking on all factors of a k = 2
/// frobenius objective, using the materialized C.
inline std::vector<Matrix> joint_gradient_descent(const Matrix& x, std::vector<Matrix> fs,
                                                  double lambda, int iters) {
  auto value = [&](const std::vector<Matrix>& f) {
    return materialized_objective(x, f, lambda, Regularizer::frobenius);
  };
  const Index p2 = fs[1].rows(), q2 = fs[1].cols();
  double step = 1.0;
  double cur = value(fs);
  for (int it = 0; it < iters; ++it) {
    const Matrix c = kron(fs[0], fs[1]);
    const Matrix gc = -2.0 * x.transpose() * (x - x * c);
    Matrix g1(fs[0].rows(), fs[0].cols());
    Matrix g2 = Matrix::Zero(p2, q2);
    for (Index a = 0; a < fs[0].rows(); ++a)
      for (Index b = 0; b < fs[0].cols(); ++b) {
        const Matrix blk = gc.block(a * p2, b * q2, p2, q2);
        g1(a, b) = (blk.array() * fs[1].array()).sum();
        g2 += fs[0](a, b) * blk;
      }
    g1 += 2.0 * lambda * fs[1].squaredNorm() * fs[0];
    g2 += 2.0 * lambda * fs[0].squaredNorm() * fs[1];
    const double gsq = g1.squaredNorm() + g2.squaredNorm();
    if (gsq < 1e-24) break;
    step *= 2.0;
    for (;;) {
      std::vector<Matrix> next{fs[0] - step * g1, fs[1] - step * g2};
      const double v = value(next);
      if (v <= cur - 0.5 * step * gsq) {
        fs = std::move(next);
        cur = v;
        break;
      }
      step *= 0.5;
      if (step < 1e-20) return fs;
    }
  }
  return fs;
}

}  // namespace kronsc::testing
