#include "rem/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <vector>

namespace rem {

namespace {

struct Spectrum {
  Eigen::MatrixXd vectors;  // columns sorted by descending eigenvalue
  Eigen::VectorXd values;
  double total = 0.0;
  int rank = 0;
};

Spectrum covariance_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& features) {
  const long n = features.rows();
  require(n >= 2, ErrorKind::InsufficientSamples, "pca: insufficient samples (need n >= 2)");
  require(features.allFinite(), ErrorKind::NonFinite, "pca: non-finite feature");

  const Eigen::RowVectorXd mean = features.colwise().mean();
  const Eigen::MatrixXd centered = features.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorKind::NonFinite, "pca: eigensolver failed");

  const long d = cov.rows();
  std::vector<long> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0L);
  const Eigen::VectorXd& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return ev(a) > ev(b); });

  Spectrum s;
  s.vectors.resize(d, d);
  s.values.resize(d);
  for (long j = 0; j < d; ++j) {
    s.values(j) = std::max(0.0, ev(order[static_cast<std::size_t>(j)]));
    Eigen::VectorXd col = solver.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
    s.vectors.col(j) = col;
  }
  s.total = s.values.sum();
  const double tol = std::max(1e-12, 1e-9 * (s.values.size() > 0 ? s.values(0) : 0.0));
  s.rank = static_cast<int>((s.values.array() > tol).count());
  return s;
}

TangentBasis truncate(const Spectrum& s, int p, bool clamped) {
  TangentBasis basis;
  basis.dim = static_cast<int>(s.vectors.rows());
  basis.p = p;
  basis.components = s.vectors.leftCols(p);
  basis.eigenvalues = s.values.head(p);
  basis.explained_variance = s.total > 0.0 ? basis.eigenvalues.sum() / s.total : 0.0;
  basis.clamped = clamped;
  return basis;
}

}  // namespace

TangentBasis pca_top_p(const Eigen::Ref<const Eigen::MatrixXd>& features, int p) {
  require(p >= 1, ErrorKind::InvalidArgument, "pca_top_p: p must be >= 1");
  require(p <= features.cols(), ErrorKind::InvalidArgument, "pca_top_p: p exceeds dimension");
  require(features.rows() >= 2, ErrorKind::InsufficientSamples,
          "pca_top_p: insufficient samples (need n >= 2)");
  require(p <= features.rows() - 1, ErrorKind::InvalidArgument, "pca_top_p: p exceeds n - 1");
  const Spectrum s = covariance_spectrum(features);
  if (s.rank < p) return truncate(s, std::max(s.rank, 0), true);
  return truncate(s, p, false);
}

TangentBasis pca_by_variance(const Eigen::Ref<const Eigen::MatrixXd>& features, double fraction,
                             int max_p) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::InvalidArgument,
          "pca_by_variance: fraction must be in (0, 1]");
  const Spectrum s = covariance_spectrum(features);
  const int limit = std::min<int>({max_p, s.rank, static_cast<int>(features.rows()) - 1});
  if (limit < 1) return truncate(s, 0, true);
  int p = 1;
  double cumulative = s.values(0);
  while (p < limit && cumulative < fraction * s.total) cumulative += s.values(p++);
  return truncate(s, p, false);
}

Eigen::MatrixXd project_off_tangent_cols(const TangentBasis& basis,
                                         const Eigen::Ref<const Eigen::MatrixXd>& deltas) {
  require_dims(deltas.rows(), basis.dim, "project_off_tangent_cols");
  if (basis.p == 0) return deltas;
  return deltas - basis.components * (basis.components.transpose() * deltas);
}

namespace {

ComplexMatrix twiddles(int n, double sign) {
  ComplexMatrix t(n, n);
  for (int k = 0; k < n; ++k) {
    for (int x = 0; x < n; ++x) {
      // Reduce k*x mod n first so the angle stays small and exact.
      const int m = (k * x) % n;
      const double angle = sign * 2.0 * std::numbers::pi * m / n;
      t(k, x) = {std::cos(angle), std::sin(angle)};
    }
  }
  return t;
}

const ComplexMatrix& cached_twiddles(int n, double sign) {
  thread_local std::map<std::pair<int, int>, ComplexMatrix> cache;
  const auto key = std::make_pair(n, sign > 0 ? 1 : -1);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, twiddles(n, sign)).first;
  return it->second;
}

}  // namespace

ComplexMatrix dft2(const Eigen::Ref<const Eigen::MatrixXd>& image) {
  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  const ComplexMatrix& th = cached_twiddles(h, -1.0);
  const ComplexMatrix& tw = cached_twiddles(w, -1.0);
  return th * image.cast<std::complex<double>>() * tw.transpose();
}

Eigen::MatrixXd idft2_real(const ComplexMatrix& spectrum) {
  const int h = static_cast<int>(spectrum.rows());
  const int w = static_cast<int>(spectrum.cols());
  const ComplexMatrix& th = cached_twiddles(h, 1.0);
  const ComplexMatrix& tw = cached_twiddles(w, 1.0);
  const ComplexMatrix out = th * spectrum * tw.transpose();
  return out.real() / static_cast<double>(h * w);
}

}  // namespace rem
