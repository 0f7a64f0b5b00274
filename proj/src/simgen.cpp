#include "hodlmm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "hodlmm/error.hpp"

namespace hodlmm {

void GenoSimConfig::validate() const {
  if (n < 2) throw InvalidInput(fmt::format("need at least 2 individuals, got {}", n));
  if (p < 1) throw InvalidInput(fmt::format("need at least 1 SNP, got {}", p));
  if (!(allele_prob >= 0.0 && allele_prob <= 1.0)) {
    throw InvalidInput(fmt::format("allele probability must lie in [0, 1], got {}", allele_prob));
  }
}

void PhenoSimConfig::validate() const {
  if (!(h2 > 0.0 && h2 < 1.0)) {
    throw InvalidInput(fmt::format("simulated h2 must lie in (0, 1), got {}", h2));
  }
  if (!(pi2 >= 0.0 && pi2 <= 1.0)) {
    throw InvalidInput(fmt::format("causal fraction must lie in [0, 1], got {}", pi2));
  }
}

GenotypeMatrix simulate_genotypes(const GenoSimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution allele(cfg.allele_prob);

  GenotypeMatrix g;
  g.dosages.resize(cfg.n, cfg.p);
  for (Index i = 0; i < cfg.n; ++i) {
    for (Index j = 0; j < cfg.p; ++j) {
      g.dosages(i, j) = static_cast<std::uint8_t>(allele(rng) + allele(rng));
    }
  }
  g.sample_ids.reserve(static_cast<std::size_t>(cfg.n));
  for (Index i = 0; i < cfg.n; ++i) g.sample_ids.push_back(fmt::format("ind_{}", i + 1));
  g.snp_ids.reserve(static_cast<std::size_t>(cfg.p));
  for (Index j = 0; j < cfg.p; ++j) g.snp_ids.push_back(fmt::format("snp_{}", j + 1));
  return g;
}

SimulatedPhenotype simulate_phenotype(const StandardizedGenotypes& x, const PhenoSimConfig& cfg) {
  cfg.validate();
  const Index n = x.x.rows();
  const Index kept = x.x.cols();
  if (n < 2 || kept == 0) throw InvalidInput("simulate_phenotype: empty genotype matrix");

  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution is_causal(cfg.pi2);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimulatedPhenotype out;
  SimTruth& truth = out.truth;

  std::vector<Index> causal;  // columns of x
  for (truth.draw_attempts = 1; truth.draw_attempts <= kMaxCausalDraws; ++truth.draw_attempts) {
    causal.clear();
    for (Index c = 0; c < kept; ++c) {
      if (is_causal(rng)) causal.push_back(c);
    }
    if (!causal.empty()) break;
  }
  if (causal.empty()) {
    truth.draw_attempts = kMaxCausalDraws;
    truth.forced_single_causal = true;
    std::uniform_int_distribution<Index> pick(0, kept - 1);
    causal.push_back(pick(rng));
  }

  const Index total = static_cast<Index>(x.retained.size() + x.dropped_monomorphic.size());
  truth.effects = Vector::Zero(total);
  Vector genetic = Vector::Zero(n);
  for (Index c : causal) {
    double u = normal(rng);
    while (u == 0.0) u = normal(rng);
    const Index source = x.retained[static_cast<std::size_t>(c)];
    truth.causal_indices.push_back(source);
    truth.effects(source) = u;
    genetic += u * x.x.col(c);
  }

  const double centered_ss = (genetic.array() - genetic.mean()).square().sum();
  truth.genetic_variance = centered_ss / static_cast<double>(n - 1);
  const double lambda = cfg.h2 / (1.0 - cfg.h2);
  truth.noise_variance = truth.genetic_variance / lambda;

  std::normal_distribution<double> noise(0.0, std::sqrt(truth.noise_variance));
  out.y = genetic;
  for (Index i = 0; i < n; ++i) out.y(i) += noise(rng);
  return out;
}

double mean_absolute_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(fmt::format("MAE of {}x{} against {}x{}", a.rows(), a.cols(),
                                        b.rows(), b.cols()));
  }
  if (a.size() == 0) throw InvalidInput("MAE of empty matrices");
  return (a - b).cwiseAbs().mean();
}

double auc_power(std::span<const double> p_values, const SimTruth& truth, double delta_alpha) {
  if (!(delta_alpha > 0.0 && delta_alpha <= 1.0)) {
    throw InvalidInput(fmt::format("threshold step must lie in (0, 1], got {}", delta_alpha));
  }
  const std::size_t total = p_values.size();
  std::vector<char> causal(total, 0);
  for (Index c : truth.causal_indices) {
    if (c < 0 || static_cast<std::size_t>(c) >= total) {
      throw InvalidInput(fmt::format("causal index {} outside {} SNPs", c, total));
    }
    causal[static_cast<std::size_t>(c)] = 1;
  }
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t j = 0; j < total; ++j) (causal[j] ? pos : neg).push_back(p_values[j]);
  if (pos.empty() || neg.empty()) {
    throw UndefinedAuc(fmt::format("AUC needs causal and null SNPs ({} causal, {} null)",
                                   pos.size(), neg.size()));
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  auto rate = [](const std::vector<double>& sorted, double alpha) {
    const auto hits = std::lower_bound(sorted.begin(), sorted.end(), alpha) - sorted.begin();
    return static_cast<double>(hits) / static_cast<double>(sorted.size());
  };

  // Thresholds are monotone, so the (FPR, TPR) points arrive sorted. The
  // curve is anchored at (1, 1) for p-values equal to 1.
  const auto steps = static_cast<long>(std::llround(1.0 / delta_alpha));
  double area = 0.0;
  double prev_fpr = 0.0;
  double prev_tpr = 0.0;
  for (long k = 0; k <= steps; ++k) {
    const double alpha = std::min(1.0, static_cast<double>(k) * delta_alpha);
    const double fpr = rate(neg, alpha);
    const double tpr = rate(pos, alpha);
    area += 0.5 * (fpr - prev_fpr) * (tpr + prev_tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  area += 0.5 * (1.0 - prev_fpr) * (1.0 + prev_tpr);
  return std::clamp(area, 0.0, 1.0);
}

}  // namespace hodlmm
