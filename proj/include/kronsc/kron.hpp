#pragma once

// Kronecker-product algebra on small dense factors.
//
// Conventions used throughout the library:
//   * matrices are dense and column-major (Eigen default);
//   * vec() stacks columns, unvec() is its exact inverse;
//   * in kron(A, B) the left operand indexes the outer blocks, so a row index
//     u of A (x) B decomposes as u = i * B.rows() + r.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace kronsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Largest number of entries kron()/kron_all() will materialize by default.
inline constexpr std::size_t kDefaultMaxEntries = std::size_t{1} << 28;

/// Builds a matrix from column-major entries; rejects wrong length or NaN/Inf.
Matrix make_matrix(Index rows, Index cols, std::span<const double> col_major);

/// Throws ShapeError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

/// Row/column dimensions of the factors C_1..C_k of an N x N Kronecker product.
struct FactorShape {
  std::vector<Index> row_dims;
  std::vector<Index> col_dims;

  std::size_t k() const { return row_dims.size(); }
  Index rows() const;  ///< product of row_dims
  Index cols() const;  ///< product of col_dims

  /// Square factors p_i x p_i.
  static FactorShape square(std::vector<Index> dims);

  /// Checks k >= 1, every dim >= 1 and that both products equal n.
  void validate(Index n) const;
};

Matrix kron(const Matrix& a, const Matrix& b, std::size_t max_entries = kDefaultMaxEntries);

/// Left fold of kron over a nonempty factor list.
Matrix kron_all(std::span<const Matrix> factors, std::size_t max_entries = kDefaultMaxEntries);

Vector vec(const Matrix& m);
Matrix unvec(const Vector& a, Index rows, Index cols);

/// a^T (C1 (x) C2), returned as a column vector, computed as
/// vec(C2^T unvec(a, p2, p1) C1) without forming the product.
Vector kron_vec_product(const Vector& a, const Matrix& c1, const Matrix& c2);

/// a^T (C_1 (x) ... (x) C_k) for any k >= 1, one mode at a time.
Vector kron_vec_product(const Vector& a, std::span<const Matrix> factors);

/// Contracts every mode except `skip` with its factor. The result is the
/// column-major tensor of shape (q_after, p_skip, q_before), where q_after and
/// q_before are the column-dimension products of the factors after and before
/// `skip`.
Vector kron_vec_product_except(const Vector& a, std::span<const Matrix> factors, std::size_t skip);

double norm_frob(const Matrix& m);
double norm_l1(const Matrix& m);  ///< entrywise sum of absolute values
double norm_nuclear(const Matrix& m);

/// Rearranges a p^2 x p^2 matrix into [vec(C_11), vec(C_12), ..., vec(C_pp)],
/// blocks listed row-block-major.
Matrix nkp_rearrange(const Matrix& c, Index p);

/// Inverse of nkp_rearrange.
Matrix nkp_unrearrange(const Matrix& r, Index p);

struct NkpResult {
  Matrix a;
  double eigval = 0.0;
  double residual = 0.0;  ///< ||A (x) A - C||_F / ||C||_F
  int iterations = 0;
};

/// Best symmetric Kronecker approximation C ~ A (x) A from the dominant
/// eigenpair of the rearranged matrix. Throws ApproximationError if the
/// dominant eigenvalue is not positive or power iteration does not converge.
NkpResult nkp_symmetric_approx(const Matrix& c, Index p, double tol = 1e-10,
                               int max_iter = 10000);

}  // namespace kronsc
