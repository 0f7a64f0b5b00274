#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hodlmm/hodlr.hpp"

namespace hodlmm {

using DosageMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Raw bi-allelic genotypes: one row per individual, one column per SNP,
/// entries count alternate alleles (0, 1 or 2).
struct GenotypeMatrix {
  std::vector<std::string> sample_ids;  // empty or one per row
  std::vector<std::string> snp_ids;     // one per column, unique
  DosageMatrix dosages;

  Index n() const { return dosages.rows(); }
  Index p() const { return dosages.cols(); }

  /// Throws InvalidInput on out-of-range dosages or inconsistent/duplicate ids.
  void validate() const;
};

struct StandardizedGenotypes {
  Matrix x;                                 // n x retained
  Vector col_means;                         // per retained column
  Vector col_sds;                           // per retained column (n-1 denominator)
  std::vector<Index> retained;              // source column of each x column
  std::vector<Index> dropped_monomorphic;   // source columns with zero variance
};

/// Genetic similarity matrix K = X X^T / n.
struct Gsm {
  Matrix k;
};

/// Upper clip for PCGC heritability; keeps lambda = h2/(1-h2) finite.
inline constexpr double kH2Max = 0.99;

struct HeritabilityEstimate {
  double h2 = 0.0;
  double lambda = 0.0;
  /// Least-squares PCGC slope before clipping to [0, kH2Max].
  double h2_unclipped = 0.0;
};

/// Applies Sigma^{-1} to each column of its argument.
using CovarianceApply = std::function<Matrix(const Matrix&)>;

/// HODLR representation of (lambda K + I)^{-1}.
struct CovarianceSolve {
  HodlrMatrix sigma_inv;
  double lambda_used = 0.0;
  double epsilon_used = 0.0;

  Index size() const { return sigma_inv.size(); }
  Matrix apply(const Matrix& x) const { return hodlr_apply(sigma_inv, x); }
  CovarianceApply applier() const;
};

/// Generalized least squares fit for one design.
struct GlsFit {
  Vector beta;
  Matrix inv_normal;  // (X^T Sigma^{-1} X)^{-1}
};

struct AssociationRecord {
  std::string snp_id;
  double beta = 0.0;       // per standardized-genotype SD
  double std_error = 0.0;
  double sigma_e2 = 0.0;
  double wald_chisq = 0.0;
  double p_value = 1.0;
};

struct WaldResult {
  double chisq = 0.0;
  double p = 1.0;
  double log10_p = 0.0;
};

StandardizedGenotypes standardize_genotypes(const GenotypeMatrix& g);
Gsm compute_gsm(const StandardizedGenotypes& x);
Vector standardize_phenotype(const Vector& y);

/// Closed-form PCGC estimate from off-diagonal products y_i y_j against K_ij.
HeritabilityEstimate pcgc_heritability(const Vector& y_std, const Gsm& k);

/// Dense Sigma = lambda K + I.
Matrix covariance_matrix(const Gsm& k, double lambda);
CovarianceSolve build_covariance_solve(const Gsm& k, double lambda, const HodlrConfig& cfg);

GlsFit gls_beta(const Matrix& design, const CovarianceApply& sigma_inv, const Vector& y);
GlsFit gls_beta(const Matrix& design, const CovarianceSolve& solve, const Vector& y);

/// Closed-form REML residual variance r^T Sigma^{-1} r / (n - c - 1) with
/// r = y - X beta; `c` counts every design column except the tested SNP.
double reml_sigma_e(const Vector& y, const Matrix& design, const Vector& beta,
                    const CovarianceApply& sigma_inv, Index c);
double reml_sigma_e(const Vector& y, const Matrix& design, const Vector& beta,
                    const CovarianceSolve& solve, Index c);

/// Upper tail of a chi-square(1) variate; accurate in log domain far into the
/// tail, with p clamped to the smallest positive double.
WaldResult chi2_1_upper_tail(double chisq);
WaldResult wald_test(double beta, double var_beta);

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
};

struct ScanOptions {
  std::optional<Matrix> covariates;  // n x c, without intercept
  HodlrConfig hodlr;
  std::optional<double> h2_override;
  unsigned workers = 1;
};

struct ScanResult {
  std::vector<AssociationRecord> records;  // retained SNPs, input order
  std::vector<std::string> dropped_snps;   // monomorphic
  HeritabilityEstimate heritability;
  Index n = 0;
  Index covariate_count = 0;  // design columns besides the SNP, intercept included
  std::vector<PhaseTiming> timings;
};

/// Builds a covariance applier from K and the shared lambda.
using SolverFactory = std::function<CovarianceApply(const Gsm&, double lambda)>;

/// The full association pipeline with a pluggable covariance inverse. Both the
/// HODLR scan and the dense reference scan run through here.
ScanResult scan_with_solver(const GenotypeMatrix& g, const Vector& y, const ScanOptions& opts,
                            const SolverFactory& make_solver, const std::string& solver_phase);

/// Association scan with the covariance inverse held in HODLR form.
ScanResult scan(const GenotypeMatrix& g, const Vector& y, const ScanOptions& opts);

}  // namespace hodlmm
