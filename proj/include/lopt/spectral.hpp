#pragma once

#include "lopt/tensor.hpp"

namespace lopt {

/// Full spectrum of a real square matrix.
///
/// Columns of `right` are right eigenvectors r_j (unit 2-norm). Columns of
/// `left` are left eigenvectors l_j scaled so that l_j^T r_j = 1, i.e.
/// left^T * right = I. Note the plain transpose: left vectors are not
/// conjugated. Complex eigenvalues of a real matrix appear as adjacent
/// conjugate pairs.
struct EigenDecomp {
  CVec eigenvalues;
  CMat right;
  CMat left;
  bool normalized = false;
  /// max |(left^T right - I)_ij|; large values indicate a (near) defective matrix.
  double biorthogonality_residual = 0.0;
};

/// Hessenberg reduction + shifted QR (Eigen's real Schur solver), with left
/// vectors recovered from the inverse of the right eigenvector matrix.
EigenDecomp eig_real(const Mat& m);

/// ||M R - R diag(lambda)||_F / ||M||_F.
double eig_residual(const Mat& m, const EigenDecomp& decomp);

struct PrincipalComponents {
  Vec mean;
  /// d x k, orthonormal columns ordered by decreasing variance.
  Mat components;
  /// Population (1/n) variance captured by each component; nonincreasing.
  Vec explained_variance;
  /// Trace of the population covariance.
  double total_variance = 0.0;

  /// (n x k) coordinates of mean-centered rows.
  Mat project(const Mat& data) const;
};

/// Top-k principal directions from the eigendecomposition of the covariance.
PrincipalComponents pca(const Mat& data, int k);

}  // namespace lopt
