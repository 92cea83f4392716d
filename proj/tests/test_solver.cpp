#include <doctest.h>

#include <random>
#include <vector>

#include "helpers.hpp"
#include "kronsc/errors.hpp"
#include "kronsc/solver.hpp"
#include "oracles.hpp"

using namespace kronsc;
using namespace kronsc::testing;

namespace {

DataMatrix make_data(Index d, Index n, std::mt19937_64& rng) {
  return DataMatrix(random_matrix(d, n, rng));
}

std::vector<Matrix> random_factors(const FactorShape& s, std::mt19937_64& rng) {
  std::vector<Matrix> fs;
  for (std::size_t i = 0; i < s.k(); ++i) fs.push_back(random_matrix(s.row_dims[i], s.col_dims[i], rng));
  return fs;
}

SolverConfig config(std::vector<Index> dims, double lambda, Regularizer r = Regularizer::frobenius) {
  SolverConfig cfg;
  cfg.shape = FactorShape::square(std::move(dims));
  cfg.lambda = lambda;
  cfg.regularizer = r;
  return cfg;
}

}  // namespace

TEST_CASE("objective trivial cases") {
  std::mt19937_64 rng(1);
  const DataMatrix x = make_data(3, 6, rng);
  SolverConfig cfg = config({2, 3}, 0.0);
  std::vector<Matrix> ids{Matrix::Identity(2, 2), Matrix::Identity(3, 3)};
  CHECK(std::abs(objective(x, ids, cfg)) < 1e-12);
  std::vector<Matrix> zeros{Matrix::Zero(2, 2), Matrix::Zero(3, 3)};
  CHECK(objective(x, zeros, cfg) == doctest::Approx(x.points().squaredNorm()));
}

TEST_CASE("objective matches materialized C") {
  std::mt19937_64 rng(2);
  const std::vector<std::vector<Index>> shapes{{2, 2}, {2, 3}, {4, 4}, {8, 8}, {2, 2, 2}, {4, 2, 8}, {2, 2, 2, 2}};
  for (const auto& dims : shapes) {
    for (Regularizer r : {Regularizer::frobenius, Regularizer::l1, Regularizer::nuclear}) {
      SolverConfig cfg = config(dims, 0.7, r);
      const DataMatrix x = make_data(random_dim(rng, 1, 6), cfg.shape.rows(), rng);
      const auto fs = random_factors(cfg.shape, rng);
      const double expect = materialized_objective(x.points(), fs, cfg.lambda, r);
      CHECK(rel_err(objective(x, fs, cfg), expect) < 1e-8);
    }
  }
}

TEST_CASE("objective rejects shape mismatch") {
  std::mt19937_64 rng(3);
  const DataMatrix x = make_data(3, 5, rng);
  SolverConfig cfg = config({2, 2}, 0.1);
  std::vector<Matrix> fs{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(objective(x, fs, cfg), ShapeError);
}

TEST_CASE("ridge system reproduces the fidelity quadratic") {
  std::mt19937_64 rng(4);
  const std::vector<std::vector<Index>> shapes{{2, 2}, {3, 2}, {2, 3, 2}};
  for (const auto& dims : shapes) {
    SolverConfig cfg = config(dims, 0.0);
    const DataMatrix x = make_data(3, cfg.shape.rows(), rng);
    auto fs = random_factors(cfg.shape, rng);
    for (std::size_t j = 0; j < fs.size(); ++j) {
      const RidgeSystem sys = build_ridge_system(x, fs, j, SystemForm::exact_sum);
      for (int t = 0; t < 3; ++t) {
        fs[j] = random_matrix(fs[j].rows(), fs[j].cols(), rng);
        const Matrix& c = fs[j];
        const double quad = (c.transpose() * sys.gram * c).trace() - 2.0 * (c.transpose() * sys.rhs).trace() +
                            sys.target_sq;
        CHECK(rel_err(quad, (x.points() - x.points() * kron_all(fs)).squaredNorm()) < 1e-9);
      }
    }
  }
}

TEST_CASE("ridge update matches dense least squares") {
  std::mt19937_64 rng(5);
  const std::vector<std::vector<Index>> shapes{{2, 2}, {3, 3}, {2, 4}, {2, 2, 2}};
  for (const auto& dims : shapes) {
    for (double lambda : {0.05, 0.2, 3.0}) {
      SolverConfig cfg = config(dims, lambda);
      const DataMatrix x = make_data(3, cfg.shape.rows(), rng);
      const auto fs = random_factors(cfg.shape, rng);
      for (std::size_t j = 0; j < fs.size(); ++j) {
        const double lj = effective_lambda(fs, j, cfg);
        double prod = 1.0;
        for (std::size_t i = 0; i < fs.size(); ++i)
          if (i != j) prod *= fs[i].squaredNorm();
        CHECK(rel_err(lj, lambda * prod) < 1e-14);
        const Matrix got = update_factor_ridge(x, fs, j, cfg);
        CHECK(rel_err(got, dense_ridge_factor(x.points(), fs, j, lj)) < 1e-8);
      }
    }
  }
}

TEST_CASE("ridge update without norm folding") {
  std::mt19937_64 rng(6);
  SolverConfig cfg = config({2, 3}, 0.4);
  cfg.fold_factor_norms = false;
  const DataMatrix x = make_data(4, 6, rng);
  const auto fs = random_factors(cfg.shape, rng);
  CHECK(effective_lambda(fs, 0, cfg) == 0.4);
  CHECK(rel_err(update_factor_ridge(x, fs, 1, cfg), dense_ridge_factor(x.points(), fs, 1, 0.4)) < 1e-8);
}

TEST_CASE("ridge update hand-computed 2x2 case") {
  // D = 1, y = [1, 0, 0, 2], C2 = I: H = diag(1, 2), lambda_1 = 0.5 * ||I||^2 = 1.
  Matrix xm(1, 4);
  xm << 1, 0, 0, 2;
  const DataMatrix x(xm);
  SolverConfig cfg = config({2, 2}, 0.5);
  std::vector<Matrix> fs{Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
  const Matrix c1 = update_factor_ridge(x, fs, 0, cfg);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 0.5;
  expect(1, 1) = 0.8;
  CHECK((c1 - expect).norm() < 1e-14);
}

TEST_CASE("identity fixed factor gives per-block regression") {
  std::mt19937_64 rng(7);
  const DataMatrix x = make_data(3, 4, rng);
  std::vector<Matrix> fs{random_matrix(2, 2, rng), Matrix::Identity(2, 2)};
  const RidgeSystem sys = build_ridge_system(x, fs, 0, SystemForm::exact_sum);
  Matrix gram = Matrix::Zero(2, 2), rhs = Matrix::Zero(2, 2);
  for (Index i = 0; i < 3; ++i) {
    const Matrix h = unvec(x.points().row(i).transpose(), 2, 2);
    gram += h.transpose() * h;
    rhs += h.transpose() * h;
  }
  CHECK(rel_err(sys.gram, gram) < 1e-14);
  CHECK(rel_err(sys.rhs, rhs) < 1e-14);
}

TEST_CASE("exact and aggregate forms") {
  std::mt19937_64 rng(8);
  SolverConfig cfg = config({2, 2}, 0.2);
  const auto fs = random_factors(cfg.shape, rng);
  const DataMatrix x3 = make_data(3, 4, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    const RidgeSystem e = build_ridge_system(x3, fs, j, SystemForm::exact_sum);
    const RidgeSystem a = build_ridge_system(x3, fs, j, SystemForm::paper_aggregate);
    CHECK(rel_err(e.gram, a.gram) > 1e-3);

    // Aggregate form from its definition: H = sum H_i, G = sum G_i.
    Matrix h = Matrix::Zero(2, 2), g = Matrix::Zero(2, 2);
    for (Index i = 0; i < 3; ++i) {
      const Matrix y = unvec(x3.points().row(i).transpose(), 2, 2);
      if (j == 0) {
        h += fs[1].transpose() * y;
        g += y;
      } else {
        h += (y * fs[0]).transpose();
        g += y.transpose();
      }
    }
    CHECK(rel_err(a.gram, Matrix(h.transpose() * h)) < 1e-12);
    CHECK(rel_err(a.rhs, Matrix(h.transpose() * g)) < 1e-12);
  }

  const DataMatrix x1 = make_data(1, 4, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    const RidgeSystem e = build_ridge_system(x1, fs, j, SystemForm::exact_sum);
    const RidgeSystem a = build_ridge_system(x1, fs, j, SystemForm::paper_aggregate);
    CHECK(rel_err(a.gram, e.gram) < 1e-14);
    CHECK(rel_err(a.rhs, e.rhs) < 1e-14);
  }
}

TEST_CASE("huge lambda shrinks the factor to zero") {
  std::mt19937_64 rng(9);
  SolverConfig cfg = config({3, 3}, 1e12);
  const DataMatrix x = make_data(4, 9, rng);
  const auto fs = random_factors(cfg.shape, rng);
  CHECK(update_factor_ridge(x, fs, 0, cfg).norm() < 1e-6);
  for (Regularizer r : {Regularizer::l1, Regularizer::nuclear}) {
    cfg.regularizer = r;
    CHECK(update_factor_prox(x, fs, 1, cfg).norm() == 0.0);
  }
}

TEST_CASE("ridge update is a local minimum") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int t = 0; t < 5; ++t) {
    SolverConfig cfg = config({2, 3}, 0.3);
    const DataMatrix x = make_data(4, 6, rng);
    auto fs = random_factors(cfg.shape, rng);
    const std::size_t j = static_cast<std::size_t>(t % 2);
    fs[j] = update_factor_ridge(x, fs, j, cfg);
    const double base = objective(x, fs, cfg);
    for (int s = 0; s < 100; ++s) {
      Matrix delta(fs[j].rows(), fs[j].cols());
      for (Index e = 0; e < delta.size(); ++e) delta(e) = g(rng);
      auto moved = fs;
      moved[j] += 1e-4 * delta / delta.norm();
      CHECK(objective(x, moved, cfg) >= base - 1e-9);
    }
  }
}

TEST_CASE("zero lambda with singular Gram") {
  SolverConfig cfg = config({2, 2}, 0.0);
  Matrix xm = Matrix::Zero(2, 4);
  xm(0, 0) = 1.0;
  const DataMatrix x(xm);
  std::vector<Matrix> fs{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(update_factor_ridge(x, fs, 0, cfg), RankDeficiencyError);
}

TEST_CASE("prox with zero lambda matches ridge") {
  std::mt19937_64 rng(11);
  SolverConfig cfg = config({2, 2}, 0.0, Regularizer::l1);
  cfg.prox_steps = 5000;
  cfg.prox_tol = 1e-14;
  const DataMatrix x = make_data(4, 4, rng);
  const auto fs = random_factors(cfg.shape, rng);
  SolverConfig ridge = cfg;
  ridge.regularizer = Regularizer::frobenius;
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(rel_err(update_factor_prox(x, fs, j, cfg), update_factor_ridge(x, fs, j, ridge)) < 1e-6);
}

TEST_CASE("prox update matches long-run ISTA") {
  std::mt19937_64 rng(12);
  for (Regularizer r : {Regularizer::l1, Regularizer::nuclear}) {
    for (int t = 0; t < 3; ++t) {
      SolverConfig cfg = config({2, 2}, 0.3, r);
      const DataMatrix x = make_data(3, 4, rng);
      const auto fs = random_factors(cfg.shape, rng);
      for (std::size_t j = 0; j < 2; ++j) {
        const double lj = effective_lambda(fs, j, cfg);
        const Matrix oracle = ista_factor(x.points(), fs, j, lj, r, 100000);
        auto ours = fs;
        ours[j] = update_factor_prox(x, fs, j, cfg);
        auto ref = fs;
        ref[j] = oracle;
        const double fo = (x.points() - x.points() * kron_all(ours)).squaredNorm() +
                          lj * (r == Regularizer::l1 ? norm_l1(ours[j]) : norm_nuclear(ours[j]));
        const double fr = (x.points() - x.points() * kron_all(ref)).squaredNorm() +
                          lj * (r == Regularizer::l1 ? norm_l1(ref[j]) : norm_nuclear(ref[j]));
        CHECK(fo <= fr + 1e-6);
        CHECK(std::abs(fo - fr) <= 1e-6);
      }
    }
  }
}

TEST_CASE("prox rejects collapsed fixed factors") {
  std::mt19937_64 rng(13);
  SolverConfig cfg = config({2, 2}, 0.3, Regularizer::l1);
  const DataMatrix x = make_data(3, 4, rng);
  std::vector<Matrix> fs{random_matrix(2, 2, rng), Matrix::Zero(2, 2)};
  CHECK_THROWS_AS(update_factor_prox(x, fs, 0, cfg), ReinitializationError);
}

TEST_CASE("initial factors") {
  const FactorShape s = FactorShape::square({4, 5});
  const auto a = initial_factors(s, 7);
  const auto b = initial_factors(s, 7);
  const auto c = initial_factors(s, 8);
  REQUIRE(a.size() == 2);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
  CHECK(a[0] != c[0]);
  const double hi = 1.0 / std::sqrt(20.0);
  for (const auto& f : a) {
    CHECK(f.minCoeff() >= 0.0);
    CHECK(f.maxCoeff() <= hi);
  }
}

TEST_CASE("max_sweeps zero returns the initialization") {
  std::mt19937_64 rng(14);
  SolverConfig cfg = config({2, 3}, 0.2);
  cfg.max_sweeps = 0;
  cfg.seed = 3;
  const DataMatrix x = make_data(3, 6, rng);
  const FactorSet fs = solve_factors(x, cfg);
  const auto init = initial_factors(cfg.shape, cfg.seed);
  CHECK(fs.sweeps == 0);
  REQUIRE(fs.objective_trace.size() == 1);
  CHECK(fs.factors[0] == init[0]);
  CHECK(fs.factors[1] == init[1]);
  CHECK(fs.objective_trace[0] == doctest::Approx(objective(x, init, cfg)));
}

TEST_CASE("objective trace is nonincreasing") {
  std::mt19937_64 rng(15);
  const std::vector<std::vector<Index>> shapes{{2, 2}, {3, 3}, {4, 5}, {2, 3, 2}};
  for (int t = 0; t < 50; ++t) {
    SolverConfig cfg = config(shapes[static_cast<std::size_t>(t) % shapes.size()], 0.05 + 0.1 * (t % 7));
    cfg.seed = static_cast<std::uint64_t>(t);
    cfg.rel_tol = 0.0;
    cfg.max_sweeps = 30;
    const DataMatrix x = make_data(random_dim(rng, 1, 6), cfg.shape.rows(), rng);
    const FactorSet fs = solve_factors(x, cfg);
    CHECK(fs.objective_trace.size() == static_cast<std::size_t>(fs.sweeps) + 1);
    for (std::size_t i = 1; i < fs.objective_trace.size(); ++i)
      CHECK(fs.objective_trace[i] <= fs.objective_trace[i - 1] + 1e-9);
    CHECK(rel_err(fs.objective_trace.back(), objective(x, fs.factors, cfg)) < 1e-12);
  }
}

TEST_CASE("prox solvers decrease the objective") {
  std::mt19937_64 rng(16);
  for (Regularizer r : {Regularizer::l1, Regularizer::nuclear}) {
    SolverConfig cfg = config({3, 3}, 0.1, r);
    cfg.seed = 5;
    const DataMatrix x = make_data(4, 9, rng);
    const FactorSet fs = solve_factors(x, cfg);
    CHECK(fs.objective_trace.back() < fs.objective_trace.front());
  }
}

TEST_CASE("alternating fixed point is a joint local minimum") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 20; ++t) {
    SolverConfig cfg = config({static_cast<Index>(2 + t % 2), 3}, 0.2);
    cfg.seed = static_cast<std::uint64_t>(100 + t);
    cfg.rel_tol = 1e-12;
    cfg.max_sweeps = 2000;
    const DataMatrix x = make_data(random_dim(rng, 1, 5), cfg.shape.rows(), rng);
    const FactorSet fs = solve_factors(x, cfg);
    // Joint descent over both factors, started at the alternating fixed point.
    const auto joint = joint_gradient_descent(x.points(), fs.factors, cfg.lambda, 20000);
    const double oracle = materialized_objective(x.points(), joint, cfg.lambda, Regularizer::frobenius);
    CHECK(fs.objective_trace.back() <= oracle + 1e-4);
  }
}

TEST_CASE("threshold_factors") {
  Matrix f(2, 2);
  f << 1, 0.05, 0.5, 0.2;
  FactorSet fs;
  fs.factors = {f, f};
  Matrix expect(2, 2);
  expect << 1, 0, 0.5, 0.2;
  const FactorSet out = threshold_factors(fs, 0.1);
  CHECK(out.factors[0] == expect);
  CHECK(threshold_factors(fs, 0.0).factors[1] == f);
  Matrix top = Matrix::Zero(2, 2);
  top(0, 0) = 1.0;
  CHECK(threshold_factors(fs, 0.999).factors[0] == top);
  CHECK_THROWS_AS(threshold_factors(fs, 1.0), ConfigError);
}

TEST_CASE("two orthogonal one-dimensional subspaces") {
  Matrix xm = Matrix::Zero(3, 4);
  xm(0, 0) = 1.0;
  xm(0, 1) = -2.0;
  xm(1, 2) = 1.5;
  xm(1, 3) = 0.5;
  const DataMatrix x(xm);
  SolverConfig cfg = config({2, 2}, 0.25);
  cfg.seed = 2;
  const FactorSet fs = solve_factors(x, cfg);
  const Matrix c = kron_all(std::span<const Matrix>(fs.factors)).cwiseAbs();
  double same = 0.0, cross = 0.0;
  for (Index u = 0; u < 4; ++u)
    for (Index v = 0; v < 4; ++v) ((u < 2) == (v < 2) ? same : cross) += c(u, v);
  CHECK(same / 8.0 > cross / 8.0);
}

TEST_CASE("independent subspaces give block-diagonal dominance") {
  std::mt19937_64 rng(18);
  // Two 2-dimensional subspaces of R^6, eight points each, contiguous.
  const Matrix b1 = random_matrix(6, 2, rng), b2 = random_matrix(6, 2, rng);
  Matrix xm(6, 16);
  xm.leftCols(8) = b1 * random_matrix(2, 8, rng);
  xm.rightCols(8) = b2 * random_matrix(2, 8, rng);
  const DataMatrix x(xm);
  SolverConfig cfg = config({4, 4}, 0.05);
  cfg.seed = 1;
  const FactorSet fs = solve_factors(x, cfg);
  const Matrix c = kron_all(std::span<const Matrix>(fs.factors)).cwiseAbs();
  double same = 0.0, cross = 0.0;
  for (Index u = 0; u < 16; ++u)
    for (Index v = 0; v < 16; ++v) ((u < 8) == (v < 8) ? same : cross) += c(u, v);
  CHECK(same / 128.0 > cross / 128.0);
}

TEST_CASE("config validation") {
  SolverConfig cfg = config({2, 2}, -1.0);
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = config({4}, 0.2);
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = config({2, 2}, 0.2);
  CHECK_THROWS(cfg.validate(5));
  CHECK(parse_regularizer("l1") == Regularizer::l1);
  CHECK(parse_system_form("paper_aggregate") == SystemForm::paper_aggregate);
  CHECK_THROWS_AS(parse_regularizer("l2"), ConfigError);
}

TEST_CASE("largest eigenvalue") {
  std::mt19937_64 rng(19);
  const Matrix a = random_matrix(5, 5, rng);
  const Matrix s = a.transpose() * a;
  const double expect = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().maxCoeff();
  CHECK(rel_err(largest_eigenvalue(s), expect) < 1e-8);
}
