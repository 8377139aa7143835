#pragma once

#include <Eigen/Dense>

#include <complex>

#include "rem/error.hpp"

namespace rem {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Storage carrier: one sample per row, 32-bit entries. Arithmetic on it is
// carried out in double.
using DenseMatrix = RowMatrixX<float>;
using FeatureVec = Eigen::VectorXd;

// Orthonormal basis U_p (dim x p) of the top-p principal directions. The
// projector P = U_p U_p^T is never materialized.
struct TangentBasis {
  int dim = 0;
  int p = 0;
  Eigen::MatrixXd components;  // dim x p, columns orthonormal
  Eigen::VectorXd eigenvalues;  // descending, length p
  double explained_variance = 0.0;
  bool clamped = false;  // requested p exceeded the covariance rank

  bool empty() const { return p == 0; }
};

// Top-p principal components of the mean-centered rows of `features`.
// Columns are ordered by descending eigenvalue; each column's largest
// magnitude entry is made nonnegative. If the covariance rank r is below p
// the basis is clamped to r and `clamped` is set.
TangentBasis pca_top_p(const Eigen::Ref<const Eigen::MatrixXd>& features, int p);

template <typename Derived>
TangentBasis pca_top_p(const Eigen::MatrixBase<Derived>& features, int p) {
  const Eigen::MatrixXd as_double = features.template cast<double>();
  return pca_top_p(Eigen::Ref<const Eigen::MatrixXd>(as_double), p);
}

// Smallest p whose cumulative explained variance reaches `fraction`, capped
// at `max_p`. Fits the full spectrum once, then truncates.
TangentBasis pca_by_variance(const Eigen::Ref<const Eigen::MatrixXd>& features, double fraction,
                             int max_p);

// (I - U U^T) delta.
template <typename Derived>
Eigen::VectorXd project_off_tangent(const TangentBasis& basis,
                                    const Eigen::MatrixBase<Derived>& delta) {
  require_dims(delta.size(), basis.dim, "project_off_tangent");
  Eigen::VectorXd d = delta.template cast<double>();
  if (basis.p == 0) return d;
  return d - basis.components * (basis.components.transpose() * d);
}

// Column-wise version: every column of `deltas` (dim x n) projected.
Eigen::MatrixXd project_off_tangent_cols(const TangentBasis& basis,
                                         const Eigen::Ref<const Eigen::MatrixXd>& deltas);

using ComplexMatrix = Eigen::MatrixXcd;

// Unnormalized 2-D DFT: F(u,v) = sum_{x,y} img(x,y) exp(-2 pi i (u x / H + v y / W)),
// rows indexed by x in [0,H), columns by y in [0,W).
ComplexMatrix dft2(const Eigen::Ref<const Eigen::MatrixXd>& image);
// Inverse of dft2 (includes the 1/(HW) factor); returns the real part.
Eigen::MatrixXd idft2_real(const ComplexMatrix& spectrum);

template <typename Derived>
Eigen::MatrixXd dft2_magnitude(const Eigen::MatrixBase<Derived>& image) {
  require(image.rows() >= 1 && image.cols() >= 1, ErrorKind::InvalidArgument,
          "dft2_magnitude: empty image");
  const Eigen::MatrixXd img = image.template cast<double>();
  require(img.allFinite(), ErrorKind::NonFinite, "dft2_magnitude: non-finite pixel");
  return dft2(img).cwiseAbs();
}

// Signed frequency of bin k in a length-n transform, in cycles per sample.
inline double bin_frequency(int k, int n) {
  const int signed_k = (k <= n / 2) ? k : k - n;
  return static_cast<double>(signed_k) / n;
}

}  // namespace rem
