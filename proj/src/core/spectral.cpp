#include "lopt/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

#include "lopt/error.hpp"

namespace lopt {

EigenDecomp eig_real(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("eig_real: matrix must be square, got " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw DimensionError("eig_real: matrix has non-finite entries");

  EigenDecomp out;
  const Eigen::Index n = m.rows();
  if (n == 0) {
    out.normalized = true;
    return out;
  }

  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eig_real: QR iteration did not converge for a " + std::to_string(n) +
                           "x" + std::to_string(n) + " matrix");
  }
  out.eigenvalues = solver.eigenvalues();
  out.right = solver.eigenvectors();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = out.right.col(j).norm();
    if (norm > 0.0) out.right.col(j) /= norm;
  }

  // Rows of R^{-1} are the left eigenvectors with l_j^T r_j = 1.
  Eigen::PartialPivLU<CMat> lu(out.right);
  out.left = lu.inverse().transpose();
  out.normalized = true;

  const CMat gram = out.left.transpose() * out.right;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double target = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(gram(i, j) - target));
    }
  }
  out.biorthogonality_residual = std::isfinite(worst) ? worst : INFINITY;
  return out;
}

double eig_residual(const Mat& m, const EigenDecomp& decomp) {
  const CMat mc = m.cast<std::complex<double>>();
  const CMat diff = mc * decomp.right - decomp.right * decomp.eigenvalues.asDiagonal();
  const double scale = m.norm();
  return scale > 0.0 ? diff.norm() / scale : diff.norm();
}

Mat PrincipalComponents::project(const Mat& data) const {
  return (data.rowwise() - mean.transpose()) * components;
}

PrincipalComponents pca(const Mat& data, int k) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw DimensionError("pca: need at least 2 rows, got " + std::to_string(n));
  if (k < 0 || k > std::min(n, d)) {
    throw DimensionError("pca: k=" + std::to_string(k) + " outside [0, " +
                         std::to_string(std::min(n, d)) + "]");
  }

  PrincipalComponents out;
  out.mean = data.colwise().mean().transpose();
  const Mat centered = data.rowwise() - out.mean.transpose();
  Mat cov = (centered.transpose() * centered) / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());
  out.total_variance = cov.trace();

  Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("pca: covariance eigensolver failed for d=" + std::to_string(d));
  }
  // Ascending order from the solver; take the top k from the back.
  out.components.resize(d, k);
  out.explained_variance.resize(k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index src = d - 1 - j;
    out.components.col(j) = solver.eigenvectors().col(src);
    out.explained_variance(j) = std::max(0.0, solver.eigenvalues()(src));
  }
  return out;
}

}  // namespace lopt
