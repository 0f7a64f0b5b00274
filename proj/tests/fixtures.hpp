#pragma once

#include <cstdint>
#include <random>

#include "hodlmm/lmm.hpp"
#include "hodlmm/simgen.hpp"

namespace fixtures {

using hodlmm::Index;
using hodlmm::Matrix;
using hodlmm::Vector;

// Seed of the canonical 64 x 100 genotype fixture.
inline constexpr std::uint64_t kCanonicalSeed = 20240601;

inline hodlmm::GenotypeMatrix genotypes(Index n, Index p, std::uint64_t seed) {
  hodlmm::GenoSimConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.seed = seed;
  return hodlmm::simulate_genotypes(cfg);
}

inline hodlmm::GenotypeMatrix canonical_genotypes() { return genotypes(64, 100, kCanonicalSeed); }

inline hodlmm::Gsm gsm_of(const hodlmm::GenotypeMatrix& g) {
  return hodlmm::compute_gsm(hodlmm::standardize_genotypes(g));
}

inline Matrix sigma_of(const hodlmm::GenotypeMatrix& g, double h2) {
  return hodlmm::covariance_matrix(gsm_of(g), h2 / (1.0 - h2));
}

// Simulated phenotype on top of g.
inline hodlmm::SimulatedPhenotype phenotype(const hodlmm::GenotypeMatrix& g, double h2,
                                            std::uint64_t seed, double pi2 = 0.05) {
  hodlmm::PhenoSimConfig cfg;
  cfg.h2 = h2;
  cfg.pi2 = pi2;
  cfg.seed = seed;
  return hodlmm::simulate_phenotype(hodlmm::standardize_genotypes(g), cfg);
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

inline Vector random_vector(Index n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

}  // namespace fixtures
