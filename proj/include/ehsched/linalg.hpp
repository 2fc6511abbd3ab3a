#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ehs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a transition matrix is not row-stochastic or has no unique
/// stationary distribution.
class ChainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checks that `m` is square, nonnegative and that every row sums to one
/// within `tol`. Throws ChainError describing the first offending entry.
template <typename Derived>
void require_row_stochastic(const Eigen::MatrixBase<Derived>& m,
                            typename Derived::Scalar tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ChainError("transition matrix must be square and nonempty");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Scalar sum = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!(m(i, j) >= Scalar(0))) {
        throw ChainError("negative transition probability at row " +
                         std::to_string(i) + ", column " + std::to_string(j));
      }
      sum += m(i, j);
    }
    if (std::abs(sum - Scalar(1)) > tol) {
      throw ChainError("row " + std::to_string(i) + " sums to " +
                       std::to_string(sum) + ", not 1");
    }
  }
}

/// k-th power by repeated squaring.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
matrix_power(const Eigen::MatrixBase<Derived>& m, long k) {
  using Result = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Result result = Result::Identity(m.rows(), m.cols());
  Result base = m;
  while (k > 0) {
    if (k & 1) result = (result * base).eval();
    k >>= 1;
    if (k > 0) base = (base * base).eval();
  }
  return result;
}

/// Stationary distribution of a row-stochastic matrix: the normalized left
/// null vector of (P - I). Requires a single recurrent class, i.e. the null
/// space of (P - I) is one-dimensional.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
stationary_distribution(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = p.rows();
  if (n == 1) return Vec::Ones(1);

  Mat a = p.transpose() - Mat::Identity(n, n);
  Eigen::FullPivLU<Mat> lu(a);
  lu.setThreshold(Scalar(1e-10));
  if (lu.rank() != n - 1) {
    throw ChainError(
        "chain has more than one recurrent class; stationary distribution is "
        "not unique");
  }
  // Replace one balance equation by the normalization constraint.
  a.row(n - 1).setOnes();
  Vec rhs = Vec::Zero(n);
  rhs(n - 1) = Scalar(1);
  Vec pi = a.fullPivLu().solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pi(i) < Scalar(0)) pi(i) = Scalar(0);
  }
  return pi / pi.sum();
}

}  // namespace ehs
