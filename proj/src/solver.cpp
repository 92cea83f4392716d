#include "kronsc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "kronsc/errors.hpp"

namespace kronsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double factor_norm(const Matrix& m, Regularizer r) {
  switch (r) {
    case Regularizer::frobenius: return m.squaredNorm();
    case Regularizer::l1: return norm_l1(m);
    case Regularizer::nuclear: return norm_nuclear(m);
  }
  return 0.0;
}

void check_factors(const DataMatrix& x, std::span<const Matrix> factors) {
  if (factors.empty()) throw ShapeError("empty factor list");
  Index rows = 1, cols = 1;
  for (const auto& f : factors) {
    rows *= f.rows();
    cols *= f.cols();
  }
  if (rows != x.count() || cols != x.count()) {
    throw ShapeError("factor product is " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " but the data has N=" + std::to_string(x.count()));
  }
}

Matrix soft_threshold(const Matrix& m, double t) {
  return m.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
}

Matrix singular_value_threshold(const Matrix& m, double t) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = (svd.singularValues().array() - t).max(0.0).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::frobenius: return "frobenius";
    case Regularizer::l1: return "l1";
    case Regularizer::nuclear: return "nuclear";
  }
  return "?";
}

std::string to_string(SystemForm f) {
  return f == SystemForm::exact_sum ? "exact_sum" : "paper_aggregate";
}

Regularizer parse_regularizer(const std::string& s) {
  if (s == "frobenius") return Regularizer::frobenius;
  if (s == "l1") return Regularizer::l1;
  if (s == "nuclear") return Regularizer::nuclear;
  throw ConfigError("unknown regularizer '" + s + "'");
}

SystemForm parse_system_form(const std::string& s) {
  if (s == "exact_sum") return SystemForm::exact_sum;
  if (s == "paper_aggregate") return SystemForm::paper_aggregate;
  throw ConfigError("unknown system form '" + s + "'");
}

void SolverConfig::validate(Index n) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (shape.k() < 2) throw ConfigError("the Kronecker solver needs k >= 2 factors");
  shape.validate(n);
  if (max_sweeps < 0) throw ConfigError("max_sweeps must be >= 0");
  if (!(threshold_tau >= 0.0 && threshold_tau < 1.0)) throw ConfigError("threshold tau must lie in [0, 1)");
  if (prox_steps < 1) throw ConfigError("prox_steps must be >= 1");
  if (!(rel_tol >= 0.0) || !(prox_tol >= 0.0)) throw ConfigError("tolerances must be >= 0");
}

Index FactorSet::rows() const {
  Index n = 1;
  for (const auto& f : factors) n *= f.rows();
  return n;
}

Index FactorSet::cols() const {
  Index n = 1;
  for (const auto& f : factors) n *= f.cols();
  return n;
}

double regularizer_value(std::span<const Matrix> factors, Regularizer r) {
  double v = 1.0;
  for (const auto& f : factors) v *= factor_norm(f, r);
  return v;
}

double objective(const DataMatrix& x, std::span<const Matrix> factors, const SolverConfig& cfg) {
  check_factors(x, factors);
  const Matrix& pts = x.points();
  double fidelity = 0.0;
  for (Index i = 0; i < pts.rows(); ++i) {
    const Vector y = pts.row(i).transpose();
    fidelity += (y - kron_vec_product(y, factors)).squaredNorm();
  }
  return fidelity + cfg.lambda * regularizer_value(factors, cfg.regularizer);
}

double effective_lambda(std::span<const Matrix> factors, std::size_t j, const SolverConfig& cfg) {
  if (!cfg.fold_factor_norms) return cfg.lambda;
  double scale = 1.0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i != j) scale *= factor_norm(factors[i], cfg.regularizer);
  }
  return cfg.lambda * scale;
}

RidgeSystem build_ridge_system(const DataMatrix& x, std::span<const Matrix> factors, std::size_t j,
                               SystemForm form) {
  check_factors(x, factors);
  if (j >= factors.size()) throw ShapeError("build_ridge_system: factor index out of range");

  const Index p = factors[j].rows();
  const Index q = factors[j].cols();
  Index q_after = 1, q_before = 1;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i < j) q_before *= factors[i].cols();
    if (i > j) q_after *= factors[i].cols();
  }
  const Index stacked = q_after * q_before;

  RidgeSystem sys{Matrix::Zero(p, p), Matrix::Zero(p, q), 0.0};
  Matrix h_sum, g_sum;
  if (form == SystemForm::paper_aggregate) {
    h_sum = Matrix::Zero(stacked, p);
    g_sum = Matrix::Zero(stacked, q);
  }

  Matrix h(stacked, p), g(stacked, q);
  const Matrix& pts = x.points();
  for (Index i = 0; i < pts.rows(); ++i) {
    const Vector y = pts.row(i).transpose();
    const Vector t = kron_vec_product_except(y, factors, j);
    // Row m * q_after + s of H_i is slab m of the (q_after, p, q_before) tensor.
    for (Index m = 0; m < q_before; ++m) {
      h.middleRows(m * q_after, q_after) =
          Eigen::Map<const Matrix>(t.data() + m * q_after * p, q_after, p);
      g.middleRows(m * q_after, q_after) =
          Eigen::Map<const Matrix>(y.data() + m * q_after * q, q_after, q);
    }
    if (form == SystemForm::exact_sum) {
      sys.gram.selfadjointView<Eigen::Lower>().rankUpdate(h.transpose());
      sys.rhs.noalias() += h.transpose() * g;
      sys.target_sq += g.squaredNorm();
    } else {
      h_sum += h;
      g_sum += g;
    }
  }
  if (form == SystemForm::exact_sum) {
    sys.gram = sys.gram.selfadjointView<Eigen::Lower>();
  } else {
    sys.gram.noalias() = h_sum.transpose() * h_sum;
    sys.rhs.noalias() = h_sum.transpose() * g_sum;
    sys.target_sq = g_sum.squaredNorm();
  }
  return sys;
}

Matrix solve_ridge(const RidgeSystem& sys, double lambda_j) {
  const Index p = sys.gram.rows();
  if (lambda_j <= 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(sys.gram);
    if (qr.rank() < p) {
      throw RankDeficiencyError("ridge update: Gram matrix is singular (rank " +
                                std::to_string(qr.rank()) + " < " + std::to_string(p) +
                                ") and the effective lambda is 0; use lambda > 0");
    }
    return qr.solve(sys.rhs);
  }
  Matrix a = sys.gram;
  a.diagonal().array() += lambda_j;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw RankDeficiencyError("ridge update: regularized Gram matrix is not positive definite");
  }
  return llt.solve(sys.rhs);
}

Matrix update_factor_ridge(const DataMatrix& x, std::span<const Matrix> factors, std::size_t j,
                           const SolverConfig& cfg) {
  const RidgeSystem sys = build_ridge_system(x, factors, j, cfg.system_form);
  return solve_ridge(sys, effective_lambda(factors, j, cfg));
}

double largest_eigenvalue(const Matrix& sym, double tol, int max_iter) {
  if (sym.rows() == 0) return 0.0;
  Vector v = Vector::Ones(sym.rows()).normalized();
  double value = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = sym * v;
    const double len = w.norm();
    if (len == 0.0) return 0.0;
    const double next = v.dot(w);
    w /= len;
    const bool done = std::abs(next - value) <= tol * std::abs(next) && (w - v).norm() < 1e-6;
    v = std::move(w);
    value = next;
    if (done) break;
  }
  // The Rayleigh quotient underestimates when the start vector is nearly
  // orthogonal to the top eigenvector; never step with a smaller bound than
  // the largest diagonal entry.
  return std::max(value, sym.diagonal().maxCoeff());
}

Matrix solve_prox(const RidgeSystem& sys, const Matrix& start, double lambda_j, Regularizer r,
                  int max_steps, double tol) {
  // Minimizes 1/2 tr(C^T G C) - tr(C^T R) + (lambda_j / 2) ||C|| by accelerated
  // proximal gradient with adaptive restart.
  const double lipschitz = largest_eigenvalue(sys.gram);
  if (!(lipschitz > 0.0)) {
    return Matrix::Zero(sys.rhs.rows(), sys.rhs.cols());
  }
  const double step = 1.0 / lipschitz;
  const double thresh = 0.5 * lambda_j * step;
  auto prox = [&](const Matrix& m) {
    if (thresh <= 0.0) return m;
    return r == Regularizer::nuclear ? singular_value_threshold(m, thresh) : soft_threshold(m, thresh);
  };

  Matrix cur = start;
  Matrix extrap = start;
  double momentum = 1.0;
  for (int it = 0; it < max_steps; ++it) {
    const Matrix grad = sys.gram * extrap - sys.rhs;
    Matrix next = prox(extrap - step * grad);
    const double change = (next - cur).norm();
    const double scale = std::max(1.0, cur.norm());
    if ((extrap - next).cwiseProduct(next - cur).sum() > 0.0) {
      momentum = 1.0;  // restart
    }
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    extrap = next + ((momentum - 1.0) / next_momentum) * (next - cur);
    momentum = next_momentum;
    cur = std::move(next);
    if (change <= tol * scale) break;
  }
  return cur;
}

Matrix update_factor_prox(const DataMatrix& x, std::span<const Matrix> factors, std::size_t j,
                          const SolverConfig& cfg) {
  if (cfg.regularizer == Regularizer::frobenius) {
    throw ConfigError("update_factor_prox: requires the l1 or nuclear regularizer");
  }
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i != j && factors[i].isZero(0.0)) {
      throw ReinitializationError("factor " + std::to_string(i) +
                                  " collapsed to zero; reinitialize the solver");
    }
  }
  const RidgeSystem sys = build_ridge_system(x, factors, j, cfg.system_form);
  return solve_prox(sys, factors[j], effective_lambda(factors, j, cfg), cfg.regularizer,
                    cfg.prox_steps, cfg.prox_tol);
}

std::vector<Matrix> initial_factors(const FactorShape& shape, std::uint64_t seed) {
  const double n = static_cast<double>(shape.rows());
  const double scale = std::pow(n, -1.0 / static_cast<double>(shape.k()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, scale);
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < shape.k(); ++i) {
    Matrix f(shape.row_dims[i], shape.col_dims[i]);
    for (Index c = 0; c < f.cols(); ++c) {
      for (Index r = 0; r < f.rows(); ++r) f(r, c) = uniform(rng);
    }
    out.push_back(std::move(f));
  }
  return out;
}

FactorSet solve_factors(const DataMatrix& x, const SolverConfig& cfg) {
  cfg.validate(x.count());
  return solve_factors(x, cfg, initial_factors(cfg.shape, cfg.seed));
}

FactorSet solve_factors(const DataMatrix& x, const SolverConfig& cfg, std::vector<Matrix> start) {
  cfg.validate(x.count());
  FactorSet fs;
  fs.factors = std::move(start);
  for (std::size_t i = 0; i < fs.factors.size(); ++i) {
    if (i >= cfg.shape.k() || fs.factors[i].rows() != cfg.shape.row_dims[i] ||
        fs.factors[i].cols() != cfg.shape.col_dims[i]) {
      throw ShapeError("solve_factors: starting factors do not match the configured shape");
    }
  }
  if (fs.factors.size() != cfg.shape.k()) {
    throw ShapeError("solve_factors: wrong number of starting factors");
  }

  double prev = objective(x, fs.factors, cfg);
  if (!std::isfinite(prev)) throw DivergenceError("solve_factors: initial objective is not finite");
  fs.objective_trace.push_back(prev);

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    for (std::size_t j = 0; j < fs.factors.size(); ++j) {
      auto t0 = Clock::now();
      if (cfg.regularizer != Regularizer::frobenius) {
        for (std::size_t i = 0; i < fs.factors.size(); ++i) {
          if (i != j && fs.factors[i].isZero(0.0)) {
            throw ReinitializationError("factor " + std::to_string(i) +
                                        " collapsed to zero; reinitialize the solver");
          }
        }
      }
      const RidgeSystem sys = build_ridge_system(x, fs.factors, j, cfg.system_form);
      fs.assembly_seconds += seconds_since(t0);
      t0 = Clock::now();
      const double lambda_j = effective_lambda(fs.factors, j, cfg);
      fs.factors[j] = cfg.regularizer == Regularizer::frobenius
                          ? solve_ridge(sys, lambda_j)
                          : solve_prox(sys, fs.factors[j], lambda_j, cfg.regularizer,
                                       cfg.prox_steps, cfg.prox_tol);
      fs.solve_seconds += seconds_since(t0);
    }
    const double cur = objective(x, fs.factors, cfg);
    if (!std::isfinite(cur)) {
      throw DivergenceError("solve_factors: objective became non-finite at sweep " +
                            std::to_string(sweep + 1));
    }
    fs.objective_trace.push_back(cur);
    fs.sweeps = sweep + 1;
    const double rel = (prev - cur) / std::max(std::abs(prev), 1e-300);
    prev = cur;
    if (cfg.rel_tol > 0.0 && rel < cfg.rel_tol) break;
  }
  return fs;
}

FactorSet threshold_factors(const FactorSet& fs, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("threshold tau must lie in [0, 1)");
  FactorSet out = fs;
  for (auto& f : out.factors) {
    if (f.size() == 0) continue;
    const double cut = tau * f.cwiseAbs().maxCoeff();
    f = f.unaryExpr([cut](double v) { return std::abs(v) < cut ? 0.0 : v; });
  }
  return out;
}

}  // namespace kronsc
