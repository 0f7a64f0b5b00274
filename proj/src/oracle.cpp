#include "hodlmm/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "hodlmm/error.hpp"

namespace hodlmm {

DenseSolve dense_spd_factor(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidInput(fmt::format("{}x{} matrix is not square", m.rows(), m.cols()));
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw FactorizationFailure("Cholesky factorization failed: matrix is not positive definite");
  }
  DenseSolve out;
  out.chol = llt.matrixL();
  out.logdet = 2.0 * out.chol.diagonal().array().log().sum();
  return out;
}

Matrix dense_spd_inverse(const Matrix& m) {
  const DenseSolve f = dense_spd_factor(m);
  Matrix inv = Matrix::Identity(m.rows(), m.cols());
  f.chol.triangularView<Eigen::Lower>().solveInPlace(inv);
  f.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
  return 0.5 * (inv + inv.transpose());
}

double pcgc_grid_search(const Vector& y_std, const Gsm& k, double step, double upper) {
  const Index n = y_std.size();
  if (k.k.rows() != n || k.k.cols() != n) throw DimensionMismatch("pcgc_grid_search: size mismatch");
  if (!(step > 0.0) || !(upper >= 0.0)) throw InvalidInput("pcgc_grid_search: bad grid");

  // The objective is a quadratic in h2; accumulate its three coefficients
  // over the off-diagonal pairs and evaluate it at every grid point.
  double yy2 = 0.0;
  double yk = 0.0;
  double kk = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double prod = y_std(i) * y_std(j);
      yy2 += prod * prod;
      yk += prod * k.k(i, j);
      kk += k.k(i, j) * k.k(i, j);
    }
  }
  const auto points = static_cast<long>(std::floor(upper / step + 1e-9));
  double best_h = 0.0;
  double best = yy2;
  for (long g = 1; g <= points; ++g) {
    const double h = static_cast<double>(g) * step;
    const double value = yy2 - 2.0 * h * yk + h * h * kk;
    if (value < best) {
      best = value;
      best_h = h;
    }
  }
  return best_h;
}

ScanResult dense_scan(const GenotypeMatrix& g, const Vector& y, const ScanOptions& opts) {
  auto factory = [](const Gsm& k, double lambda) -> CovarianceApply {
    auto inv = std::make_shared<const Matrix>(dense_spd_inverse(covariance_matrix(k, lambda)));
    return [inv](const Matrix& m) -> Matrix { return (*inv) * m; };
  };
  return scan_with_solver(g, y, opts, factory, "dense_inverse");
}

double gaussian_kl(const Vector& mu1, const Matrix& s1, const Vector& mu2, const Matrix& s2) {
  const Index n = mu1.size();
  if (mu2.size() != n || s1.rows() != n || s1.cols() != n || s2.rows() != n || s2.cols() != n) {
    throw DimensionMismatch("gaussian_kl: inconsistent dimensions");
  }
  const DenseSolve f1 = dense_spd_factor(s1);
  const DenseSolve f2 = dense_spd_factor(s2);
  static_cast<void>(f1);

  // With mu_i the eigenvalues of s2^{-1} s1,
  //   tr(s2^{-1} s1) - n + logdet s2 - logdet s1 = sum(mu_i - 1 - log mu_i),
  // which avoids cancellation when the two covariances nearly agree.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(s1, s2, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw FactorizationFailure("gaussian_kl: eigensolver failed");
  double spectral = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = eig.eigenvalues()(i) - 1.0;
    if (!(d > -1.0)) throw FactorizationFailure("gaussian_kl: covariance is not positive definite");
    spectral += d - std::log1p(d);
  }

  Vector delta = mu2 - mu1;
  f2.chol.triangularView<Eigen::Lower>().solveInPlace(delta);
  return 0.5 * (spectral + delta.squaredNorm());
}

}  // namespace hodlmm
