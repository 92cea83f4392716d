#include "kronsc/kron.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "kronsc/errors.hpp"

namespace kronsc {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw SizeLimitError("Kronecker product dimensions overflow");
  }
  return a * b;
}

// Contracts mode `mid` of a column-major tensor of shape (inner, mid, outer)
// with `f`, giving shape (inner, f.cols(), outer): out[:, d, o] = sum_c f(c, d) in[:, c, o].
Vector contract_mode(const Vector& in, Index inner, Index outer, const Matrix& f) {
  const Index mid = f.rows();
  const Index out_mid = f.cols();
  Vector out(inner * out_mid * outer);
  for (Index o = 0; o < outer; ++o) {
    Eigen::Map<const Matrix> slab(in.data() + o * inner * mid, inner, mid);
    Eigen::Map<Matrix> dst(out.data() + o * inner * out_mid, inner, out_mid);
    dst.noalias() = slab * f;
  }
  return out;
}

}  // namespace

Matrix make_matrix(Index rows, Index cols, std::span<const double> col_major) {
  if (rows < 0 || cols < 0 ||
      col_major.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ShapeError("make_matrix: expected " + std::to_string(rows * cols) + " entries, got " +
                     std::to_string(col_major.size()));
  }
  Matrix m = Eigen::Map<const Matrix>(col_major.data(), rows, cols);
  require_finite(m, "make_matrix");
  return m;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw ShapeError(std::string(what) + ": matrix contains NaN or Inf");
  }
}

Index FactorShape::rows() const {
  Index n = 1;
  for (Index d : row_dims) n *= d;
  return n;
}

Index FactorShape::cols() const {
  Index n = 1;
  for (Index d : col_dims) n *= d;
  return n;
}

FactorShape FactorShape::square(std::vector<Index> dims) {
  FactorShape s;
  s.row_dims = dims;
  s.col_dims = std::move(dims);
  return s;
}

void FactorShape::validate(Index n) const {
  if (row_dims.empty() || row_dims.size() != col_dims.size()) {
    throw ShapeError("FactorShape: need k >= 1 row and column dims of equal count");
  }
  for (std::size_t i = 0; i < row_dims.size(); ++i) {
    if (row_dims[i] < 1 || col_dims[i] < 1) {
      throw ShapeError("FactorShape: every dimension must be >= 1");
    }
  }
  if (rows() != n || cols() != n) {
    throw ShapeError("FactorShape: dimension products " + std::to_string(rows()) + "x" +
                     std::to_string(cols()) + " do not match N=" + std::to_string(n));
  }
}

Matrix kron(const Matrix& a, const Matrix& b, std::size_t max_entries) {
  const std::size_t rows = checked_mul(a.rows(), b.rows());
  const std::size_t cols = checked_mul(a.cols(), b.cols());
  if (checked_mul(rows, cols) > max_entries) {
    throw SizeLimitError("kron: result " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " exceeds the limit of " + std::to_string(max_entries) + " entries");
  }
  Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix kron_all(std::span<const Matrix> factors, std::size_t max_entries) {
  if (factors.empty()) {
    throw ShapeError("kron_all: empty factor list");
  }
  Matrix acc = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) {
    acc = kron(acc, factors[i], max_entries);
  }
  return acc;
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& a, Index rows, Index cols) {
  if (rows < 0 || cols < 0 || a.size() != rows * cols) {
    throw ShapeError("unvec: vector of length " + std::to_string(a.size()) +
                     " cannot be reshaped to " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Eigen::Map<const Matrix>(a.data(), rows, cols);
}

Vector kron_vec_product(const Vector& a, const Matrix& c1, const Matrix& c2) {
  if (a.size() != c1.rows() * c2.rows()) {
    throw ShapeError("kron_vec_product: vector length " + std::to_string(a.size()) +
                     " does not match factors " + dims(c1) + " and " + dims(c2));
  }
  const Matrix reshaped = unvec(a, c2.rows(), c1.rows());
  return vec(c2.transpose() * reshaped * c1);
}

Vector kron_vec_product(const Vector& a, std::span<const Matrix> factors) {
  if (factors.empty()) {
    throw ShapeError("kron_vec_product: empty factor list");
  }
  Index total = 1;
  for (const auto& f : factors) total *= f.rows();
  if (a.size() != total) {
    throw ShapeError("kron_vec_product: vector length " + std::to_string(a.size()) +
                     " does not match factor row product " + std::to_string(total));
  }
  // Tensor view: the last factor indexes the fastest-varying mode.
  Vector cur = a;
  Index inner = 1;
  for (std::size_t i = factors.size(); i-- > 0;) {
    const Matrix& f = factors[i];
    const Index outer = cur.size() / (inner * f.rows());
    cur = contract_mode(cur, inner, outer, f);
    inner *= f.cols();
  }
  return cur;
}

Vector kron_vec_product_except(const Vector& a, std::span<const Matrix> factors, std::size_t skip) {
  if (skip >= factors.size()) {
    throw ShapeError("kron_vec_product_except: factor index out of range");
  }
  Index total = 1;
  for (const auto& f : factors) total *= f.rows();
  if (a.size() != total) {
    throw ShapeError("kron_vec_product_except: vector length " + std::to_string(a.size()) +
                     " does not match factor row product " + std::to_string(total));
  }
  Vector cur = a;
  Index inner = 1;
  for (std::size_t i = factors.size(); i-- > 0;) {
    const Matrix& f = factors[i];
    if (i == skip) {
      inner *= f.rows();
      continue;
    }
    const Index outer = cur.size() / (inner * f.rows());
    cur = contract_mode(cur, inner, outer, f);
    inner *= f.cols();
  }
  return cur;
}

double norm_frob(const Matrix& m) { return m.norm(); }

double norm_l1(const Matrix& m) { return m.cwiseAbs().sum(); }

double norm_nuclear(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

Matrix nkp_rearrange(const Matrix& c, Index p) {
  if (p < 1 || c.rows() != p * p || c.cols() != p * p) {
    throw ShapeError("nkp_rearrange: expected a " + std::to_string(p * p) + "x" +
                     std::to_string(p * p) + " matrix, got " + dims(c));
  }
  Matrix out(p * p, p * p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      const Matrix block = c.block(i * p, j * p, p, p);
      out.col(i * p + j) = vec(block);
    }
  }
  return out;
}

Matrix nkp_unrearrange(const Matrix& r, Index p) {
  if (p < 1 || r.rows() != p * p || r.cols() != p * p) {
    throw ShapeError("nkp_unrearrange: expected a " + std::to_string(p * p) + "x" +
                     std::to_string(p * p) + " matrix, got " + dims(r));
  }
  Matrix out(p * p, p * p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      out.block(i * p, j * p, p, p) = unvec(r.col(i * p + j), p, p);
    }
  }
  return out;
}

NkpResult nkp_symmetric_approx(const Matrix& c, Index p, double tol, int max_iter) {
  const Matrix rearranged = nkp_rearrange(c, p);

  // <A (x) A, C> = vec(A)^T Q vec(A) needs block (i, j) in the column that
  // holds a_ij in vec(A), i.e. column j * p + i.
  Matrix q(p * p, p * p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      q.col(j * p + i) = rearranged.col(i * p + j);
    }
  }
  const Matrix s = 0.5 * (q + q.transpose());

  // Shift by an upper bound on the spectral radius so the iteration finds the
  // largest algebraic eigenvalue.
  const double shift = s.norm();
  Vector v = Vector::Ones(p * p).normalized();
  NkpResult res;
  bool converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    Vector next = s * v + shift * v;
    const double len = next.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw ApproximationError("nkp_symmetric_approx: zero spectrum", v);
    }
    next /= len;
    const double change = (next - v).norm();
    v = std::move(next);
    res.iterations = it;
    if (change < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ApproximationError("nkp_symmetric_approx: power iteration did not converge in " +
                                 std::to_string(max_iter) + " iterations",
                             v);
  }
  res.eigval = v.dot(s * v);
  if (!(res.eigval > 0.0)) {
    throw ApproximationError("nkp_symmetric_approx: dominant eigenvalue " +
                                 std::to_string(res.eigval) + " is not positive",
                             v);
  }
  // ||A||_F^2 equals the eigenvalue at a stationary point.
  Matrix a = unvec(v, p, p) * std::sqrt(res.eigval);
  if (a.trace() < 0.0) a = -a;
  res.residual = (kron(a, a) - c).norm() / c.norm();
  res.a = std::move(a);
  return res;
}

}  // namespace kronsc
