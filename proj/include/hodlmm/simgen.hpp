#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hodlmm/lmm.hpp"

namespace hodlmm {

/// Bi-allelic genotype simulation; each dosage is the sum of two independent
/// Bernoulli(allele_prob) alleles.
struct GenoSimConfig {
  Index n = 500;
  Index p = 100;
  double allele_prob = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Spike-and-slab phenotype simulation y = W u + e.
struct PhenoSimConfig {
  double h2 = 0.1;
  double pi2 = 0.05;  // per-SNP probability of a nonzero effect
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimTruth {
  std::vector<Index> causal_indices;  // genotype columns, ascending
  Vector effects;                     // one per genotype column, zero off the causal set
  double genetic_variance = 0.0;      // empirical variance of W u
  double noise_variance = 0.0;
  /// Number of causal-set draws taken (1 unless the draw came back empty).
  int draw_attempts = 1;
  /// True when every draw was empty and a single SNP was picked uniformly.
  bool forced_single_causal = false;
};

struct SimulatedPhenotype {
  Vector y;
  SimTruth truth;
};

/// Maximum number of causal-set draws before falling back to one forced SNP.
inline constexpr int kMaxCausalDraws = 100;

GenotypeMatrix simulate_genotypes(const GenoSimConfig& cfg);
SimulatedPhenotype simulate_phenotype(const StandardizedGenotypes& x, const PhenoSimConfig& cfg);

double mean_absolute_error(const Matrix& a, const Matrix& b);

/// ROC area from sweeping the significance threshold over {0, d, 2d, ..., 1};
/// p_values holds one entry per genotype column.
double auc_power(std::span<const double> p_values, const SimTruth& truth,
                 double delta_alpha = 1e-4);

}  // namespace hodlmm
