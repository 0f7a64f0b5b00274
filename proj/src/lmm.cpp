#include "hodlmm/lmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>

#include "hodlmm/error.hpp"

namespace hodlmm {

void GenotypeMatrix::validate() const {
  if (static_cast<Index>(snp_ids.size()) != p()) {
    throw InvalidInput(fmt::format("{} SNP ids for {} genotype columns", snp_ids.size(), p()));
  }
  if (!sample_ids.empty() && static_cast<Index>(sample_ids.size()) != n()) {
    throw InvalidInput(fmt::format("{} sample ids for {} genotype rows", sample_ids.size(), n()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : snp_ids) {
    if (!seen.insert(id).second) throw InvalidInput(fmt::format("duplicate SNP id '{}'", id));
  }
  for (Index j = 0; j < p(); ++j) {
    for (Index i = 0; i < n(); ++i) {
      if (dosages(i, j) > 2) {
        throw InvalidInput(fmt::format("dosage {} at row {}, SNP '{}' is outside {{0,1,2}}",
                                       static_cast<int>(dosages(i, j)), i, snp_ids[j]));
      }
    }
  }
}

StandardizedGenotypes standardize_genotypes(const GenotypeMatrix& g) {
  g.validate();
  const Index n = g.n();
  if (n < 2) throw InvalidInput("standardize_genotypes: need at least 2 individuals");

  StandardizedGenotypes out;
  std::vector<double> means;
  std::vector<double> sds;
  for (Index j = 0; j < g.p(); ++j) {
    const auto col = g.dosages.col(j).cast<double>();
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    if (ss <= 0.0) {
      out.dropped_monomorphic.push_back(j);
      continue;
    }
    out.retained.push_back(j);
    means.push_back(mean);
    sds.push_back(std::sqrt(ss / static_cast<double>(n - 1)));
  }
  if (out.retained.empty()) throw EmptyDesign("every SNP is monomorphic");

  const Index kept = static_cast<Index>(out.retained.size());
  out.x.resize(n, kept);
  out.col_means = Eigen::Map<const Vector>(means.data(), kept);
  out.col_sds = Eigen::Map<const Vector>(sds.data(), kept);
  for (Index c = 0; c < kept; ++c) {
    out.x.col(c) = (g.dosages.col(out.retained[c]).cast<double>().array() - means[c]) / sds[c];
  }
  return out;
}

Gsm compute_gsm(const StandardizedGenotypes& x) {
  if (x.x.rows() == 0) throw InvalidInput("compute_gsm: empty genotype matrix");
  const double n = static_cast<double>(x.x.rows());
  Matrix k = (x.x * x.x.transpose()) / n;
  return Gsm{0.5 * (k + k.transpose())};
}

Vector standardize_phenotype(const Vector& y) {
  const Index n = y.size();
  if (n < 2) throw DegeneratePhenotype("phenotype needs at least 2 values");
  if (!y.allFinite()) throw InvalidInput("phenotype has non-finite values");
  const double mean = y.mean();
  const Vector centered = y.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n - 1));
  if (!(sd > 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff()))) {
    throw DegeneratePhenotype("phenotype is constant");
  }
  return centered / sd;
}

HeritabilityEstimate pcgc_heritability(const Vector& y_std, const Gsm& k) {
  const Index n = y_std.size();
  if (k.k.rows() != n || k.k.cols() != n) {
    throw DimensionMismatch(
        fmt::format("pcgc: phenotype length {} vs GSM {}x{}", n, k.k.rows(), k.k.cols()));
  }
  double num = 0.0;
  double den = 0.0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const double kij = k.k(i, j);
      num += y_std(i) * y_std(j) * kij;
      den += kij * kij;
    }
  }
  if (!(den > 0.0)) {
    throw UnidentifiableHeritability("GSM has no off-diagonal signal; PCGC is undefined");
  }
  HeritabilityEstimate est;
  est.h2_unclipped = num / den;
  est.h2 = std::clamp(est.h2_unclipped, 0.0, kH2Max);
  est.lambda = est.h2 / (1.0 - est.h2);
  return est;
}

Matrix covariance_matrix(const Gsm& k, double lambda) {
  Matrix sigma = lambda * k.k;
  sigma.diagonal().array() += 1.0;
  return sigma;
}

CovarianceApply CovarianceSolve::applier() const {
  return [this](const Matrix& x) { return apply(x); };
}

CovarianceSolve build_covariance_solve(const Gsm& k, double lambda, const HodlrConfig& cfg) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput(fmt::format("lambda must be finite and non-negative, got {}", lambda));
  }
  return CovarianceSolve{hodlr_inverse(covariance_matrix(k, lambda), cfg), lambda, cfg.epsilon};
}

namespace {

GlsFit gls_from_products(const Matrix& design, const Matrix& sinv_design, const Vector& y) {
  Matrix normal = design.transpose() * sinv_design;
  normal = 0.5 * (normal + normal.transpose());
  const Vector rhs = sinv_design.transpose() * y;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(top > 0.0) || !(bottom > 1e-12 * top)) {
    throw SingularDesign(fmt::format(
        "design is rank deficient (normal-matrix eigenvalues {:.3e} .. {:.3e})", bottom, top));
  }
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) throw SingularDesign("normal matrix is not positive definite");

  GlsFit fit;
  fit.beta = llt.solve(rhs);
  fit.inv_normal = llt.solve(Matrix::Identity(normal.rows(), normal.cols()));
  return fit;
}

double reml_from_products(const Vector& residual, const Vector& sinv_residual, Index n, Index c) {
  if (n <= c + 1) {
    throw InsufficientDof(fmt::format("{} individuals leave no residual degrees of freedom for "
                                      "{} fixed effects",
                                      n, c + 1));
  }
  return residual.dot(sinv_residual) / static_cast<double>(n - c - 1);
}

void check_design(const Matrix& design, const Vector& y) {
  if (design.rows() != y.size()) {
    throw DimensionMismatch(
        fmt::format("design has {} rows, phenotype {} values", design.rows(), y.size()));
  }
  if (design.cols() == 0) throw InvalidInput("design has no columns");
}

}  // namespace

GlsFit gls_beta(const Matrix& design, const CovarianceApply& sigma_inv, const Vector& y) {
  check_design(design, y);
  return gls_from_products(design, sigma_inv(design), y);
}

GlsFit gls_beta(const Matrix& design, const CovarianceSolve& solve, const Vector& y) {
  return gls_beta(design, solve.applier(), y);
}

double reml_sigma_e(const Vector& y, const Matrix& design, const Vector& beta,
                    const CovarianceApply& sigma_inv, Index c) {
  check_design(design, y);
  if (beta.size() != design.cols()) {
    throw DimensionMismatch(
        fmt::format("{} coefficients for {} design columns", beta.size(), design.cols()));
  }
  const Index n = y.size();
  if (n <= c + 1) {
    throw InsufficientDof(fmt::format("n = {} must exceed c + 1 = {}", n, c + 1));
  }
  const Vector r = y - design * beta;
  const Vector sinv_r = sigma_inv(r);
  return reml_from_products(r, sinv_r, n, c);
}

double reml_sigma_e(const Vector& y, const Matrix& design, const Vector& beta,
                    const CovarianceSolve& solve, Index c) {
  return reml_sigma_e(y, design, beta, solve.applier(), c);
}

WaldResult chi2_1_upper_tail(double chisq) {
  if (std::isnan(chisq) || chisq < 0.0) {
    throw InvalidInput(fmt::format("chi-square statistic must be non-negative, got {}", chisq));
  }
  WaldResult out;
  out.chisq = chisq;
  const double z = std::sqrt(0.5 * chisq);
  if (chisq <= 200.0) {
    out.p = std::erfc(z);
    out.log10_p = std::log10(out.p);
    return out;
  }
  // erfc(z) = exp(-z^2) / sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
  double t = z;
  for (int k = 80; k >= 1; --k) t = z + (0.5 * k) / t;
  const double log_p = -z * z - 0.5 * std::log(std::numbers::pi) - std::log(t);
  out.log10_p = log_p / std::numbers::ln10;
  out.p = std::max(std::exp(log_p), std::numeric_limits<double>::denorm_min());
  return out;
}

WaldResult wald_test(double beta, double var_beta) {
  if (!(var_beta > 0.0) || !std::isfinite(var_beta)) {
    throw InvalidVariance(fmt::format("variance of the effect must be positive, got {}", var_beta));
  }
  return chi2_1_upper_tail(beta * beta / var_beta);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// SNP columns go through the covariance operator in blocks of this many, so
// results never depend on how blocks are spread over workers.
constexpr Index kSnpBlock = 16;

}  // namespace

ScanResult scan_with_solver(const GenotypeMatrix& g, const Vector& y, const ScanOptions& opts,
                            const SolverFactory& make_solver, const std::string& solver_phase) {
  g.validate();
  const Index n = g.n();
  if (y.size() != n) {
    throw DimensionMismatch(fmt::format("phenotype has {} values for {} individuals", y.size(), n));
  }
  const Index n_cov = opts.covariates ? opts.covariates->cols() : 0;
  if (opts.covariates && opts.covariates->rows() != n) {
    throw DimensionMismatch(
        fmt::format("covariates have {} rows for {} individuals", opts.covariates->rows(), n));
  }
  if (opts.h2_override && !(*opts.h2_override >= 0.0 && *opts.h2_override < 1.0)) {
    throw InvalidInput(fmt::format("h2 override must lie in [0, 1), got {}", *opts.h2_override));
  }
  // design = [intercept | covariates | SNP]
  const Index q = n_cov + 2;
  if (n <= q) {
    throw InsufficientDof(fmt::format("{} individuals for {} fixed effects", n, q));
  }

  ScanResult result;
  result.n = n;
  result.covariate_count = q - 1;

  auto t0 = Clock::now();
  const StandardizedGenotypes x = standardize_genotypes(g);
  for (Index j : x.dropped_monomorphic) result.dropped_snps.push_back(g.snp_ids[j]);
  result.timings.push_back({"standardize", seconds_since(t0)});

  t0 = Clock::now();
  const Gsm k = compute_gsm(x);
  result.timings.push_back({"gsm", seconds_since(t0)});

  t0 = Clock::now();
  if (opts.h2_override) {
    const double h2 = *opts.h2_override;
    result.heritability = {h2, h2 / (1.0 - h2), h2};
  } else {
    result.heritability = pcgc_heritability(standardize_phenotype(y), k);
  }
  result.timings.push_back({"heritability", seconds_since(t0)});

  t0 = Clock::now();
  const CovarianceApply sigma_inv = make_solver(k, result.heritability.lambda);
  result.timings.push_back({solver_phase, seconds_since(t0)});

  t0 = Clock::now();
  Matrix fixed(n, q - 1);
  fixed.col(0).setOnes();
  if (n_cov > 0) fixed.rightCols(n_cov) = *opts.covariates;
  const Matrix sinv_fixed = sigma_inv(fixed);
  const Vector sinv_y = sigma_inv(y);

  const Index snps = x.x.cols();
  result.records.resize(static_cast<std::size_t>(snps));
  const Index blocks = (snps + kSnpBlock - 1) / kSnpBlock;

  std::atomic<Index> next_block{0};
  std::mutex error_mutex;
  Index error_snp = snps;
  std::exception_ptr error;

  auto worker = [&]() {
    Matrix design(n, q);
    Matrix sinv_design(n, q);
    design.leftCols(q - 1) = fixed;
    sinv_design.leftCols(q - 1) = sinv_fixed;
    for (Index b = next_block++; b < blocks; b = next_block++) {
      const Index first = b * kSnpBlock;
      const Index width = std::min(kSnpBlock, snps - first);
      Index current = first;
      try {
        const Matrix sinv_x = sigma_inv(x.x.middleCols(first, width));
        for (Index c = 0; c < width; ++c) {
          current = first + c;
          design.col(q - 1) = x.x.col(current);
          sinv_design.col(q - 1) = sinv_x.col(c);
          const GlsFit fit = gls_from_products(design, sinv_design, y);
          const Vector residual = y - design * fit.beta;
          const Vector sinv_residual = sinv_y - sinv_design * fit.beta;
          const double sigma_e2 = reml_from_products(residual, sinv_residual, n, q - 1);
          const double var_beta = sigma_e2 * fit.inv_normal(q - 1, q - 1);
          const WaldResult wald = wald_test(fit.beta(q - 1), var_beta);

          AssociationRecord& rec = result.records[static_cast<std::size_t>(current)];
          rec.snp_id = g.snp_ids[x.retained[current]];
          rec.beta = fit.beta(q - 1);
          rec.std_error = std::sqrt(var_beta);
          rec.sigma_e2 = sigma_e2;
          rec.wald_chisq = wald.chisq;
          rec.p_value = wald.p;
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (current < error_snp) {
          error_snp = current;
          error = std::current_exception();
        }
      }
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (error) {
    const std::string& id = g.snp_ids[x.retained[error_snp]];
    try {
      std::rethrow_exception(error);
    } catch (const Error& e) {
      throw Error(e.error_class(), fmt::format("SNP '{}': {}", id, e.what()));
    } catch (const std::exception& e) {
      throw NumericalError(fmt::format("SNP '{}': {}", id, e.what()));
    }
  }
  result.timings.push_back({"association", seconds_since(t0)});
  return result;
}

ScanResult scan(const GenotypeMatrix& g, const Vector& y, const ScanOptions& opts) {
  opts.hodlr.validate();
  auto factory = [&opts](const Gsm& k, double lambda) -> CovarianceApply {
    auto solve =
        std::make_shared<const CovarianceSolve>(build_covariance_solve(k, lambda, opts.hodlr));
    return [solve](const Matrix& m) { return solve->apply(m); };
  };
  return scan_with_solver(g, y, opts, factory, "hodlr_inverse");
}

}  // namespace hodlmm
