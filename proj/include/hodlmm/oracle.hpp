#pragma once

#include "hodlmm/lmm.hpp"

namespace hodlmm {

// Dense O(n^3) references used to validate the HODLR pipeline.

/// Lower Cholesky factor of an SPD matrix and its log-determinant.
struct DenseSolve {
  Matrix chol;
  double logdet = 0.0;
};

DenseSolve dense_spd_factor(const Matrix& m);
Matrix dense_spd_inverse(const Matrix& m);

/// Exhaustive minimization of sum_{i != j} (y_i y_j - h2 K_ij)^2 over the grid
/// {0, step, 2 step, ...} up to `upper`.
double pcgc_grid_search(const Vector& y_std, const Gsm& k, double step = 1e-4,
                        double upper = 1.0);

/// scan() with an exact dense inverse of Sigma in place of the HODLR solve.
/// opts.hodlr is ignored.
ScanResult dense_scan(const GenotypeMatrix& g, const Vector& y, const ScanOptions& opts);

/// KL(N(mu1, s1) || N(mu2, s2)).
double gaussian_kl(const Vector& mu1, const Matrix& s1, const Vector& mu2, const Matrix& s2);

}  // namespace hodlmm
