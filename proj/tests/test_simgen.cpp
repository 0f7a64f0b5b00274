#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "hodlmm/error.hpp"
#include "hodlmm/simgen.hpp"

using namespace hodlmm;

namespace {

// Pairwise concordance: P(p_causal < p_null) + 0.5 P(tie).
double mann_whitney_auc(const std::vector<double>& p, const std::vector<Index>& causal) {
  std::vector<char> is_causal(p.size(), 0);
  for (Index c : causal) is_causal[static_cast<std::size_t>(c)] = 1;
  double score = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!is_causal[i]) continue;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (is_causal[j]) continue;
      score += p[i] < p[j] ? 1.0 : (p[i] == p[j] ? 0.5 : 0.0);
      pairs += 1.0;
    }
  }
  return score / pairs;
}

SimTruth truth_with(std::vector<Index> causal, Index total) {
  SimTruth t;
  t.causal_indices = std::move(causal);
  t.effects = Vector::Zero(total);
  for (Index c : t.causal_indices) t.effects(c) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("simulate_genotypes") {
  SUBCASE("heterozygosity at allele probability 0.5") {
    const GenotypeMatrix g = fixtures::genotypes(1000, 100, 3);
    const double het = static_cast<double>((g.dosages.array() == 1).count()) / static_cast<double>(g.dosages.size());
    CHECK(std::abs(het - 0.5) < 0.01);
  }
  SUBCASE("allele frequency within three binomial SDs") {
    for (double q : {0.1, 0.3, 0.5, 0.8}) {
      GenoSimConfig cfg;
      cfg.n = 200;
      cfg.p = 60;
      cfg.allele_prob = q;
      cfg.seed = 17;
      const GenotypeMatrix g = simulate_genotypes(cfg);
      const double alleles = 2.0 * static_cast<double>(g.dosages.size());
      const double freq = g.dosages.cast<double>().sum() / alleles;
      CHECK(std::abs(freq - q) < 3.0 * std::sqrt(q * (1 - q) / alleles));
      CHECK(g.dosages.maxCoeff() <= 2);
    }
  }
  SUBCASE("vanishing allele probability gives all zeros") {
    GenoSimConfig cfg;
    cfg.n = 50;
    cfg.p = 20;
    cfg.allele_prob = 0.0;
    CHECK(simulate_genotypes(cfg).dosages.cast<int>().sum() == 0);
    cfg.allele_prob = 1e-15;
    CHECK(simulate_genotypes(cfg).dosages.cast<int>().sum() == 0);
  }
  SUBCASE("determinism and ids") {
    const GenotypeMatrix a = fixtures::genotypes(64, 100, 1);
    const GenotypeMatrix b = fixtures::genotypes(64, 100, 1);
    const GenotypeMatrix c = fixtures::genotypes(64, 100, 2);
    CHECK(a.dosages == b.dosages);
    CHECK(a.dosages != c.dosages);
    CHECK(a.sample_ids.front() == "ind_1");
    CHECK(a.snp_ids.back() == "snp_100");
  }
  SUBCASE("errors") {
    GenoSimConfig cfg;
    cfg.n = 1;
    CHECK_THROWS_AS(simulate_genotypes(cfg), InvalidInput);
    cfg.n = 10;
    cfg.p = 0;
    CHECK_THROWS_AS(simulate_genotypes(cfg), InvalidInput);
    cfg.p = 5;
    cfg.allele_prob = 1.5;
    CHECK_THROWS_AS(simulate_genotypes(cfg), InvalidInput);
  }
}

TEST_CASE("simulate_phenotype") {
  const GenotypeMatrix g = fixtures::genotypes(256, 100, 41);
  const StandardizedGenotypes x = standardize_genotypes(g);

  SUBCASE("effects are nonzero exactly on the causal set") {
    const SimulatedPhenotype s = fixtures::phenotype(g, 0.3, 5, 0.2);
    CHECK(!s.truth.causal_indices.empty());
    CHECK(std::is_sorted(s.truth.causal_indices.begin(), s.truth.causal_indices.end()));
    Index nonzero = 0;
    for (Index j = 0; j < s.truth.effects.size(); ++j) {
      const bool causal = std::find(s.truth.causal_indices.begin(), s.truth.causal_indices.end(), j) !=
                          s.truth.causal_indices.end();
      CHECK((s.truth.effects(j) != 0.0) == causal);
      nonzero += s.truth.effects(j) != 0.0;
    }
    CHECK(nonzero == static_cast<Index>(s.truth.causal_indices.size()));
    const double lambda = 0.3 / 0.7;
    CHECK(s.truth.noise_variance == doctest::Approx(s.truth.genetic_variance / lambda));
  }
  SUBCASE("noiseless limit") {
    PhenoSimConfig cfg;
    cfg.pi2 = 1.0;
    cfg.h2 = 1.0 - 1e-12;
    cfg.seed = 3;
    const SimulatedPhenotype s = simulate_phenotype(x, cfg);
    CHECK(s.truth.causal_indices.size() == 100);
    const Vector wu = x.x * s.truth.effects;
    CHECK((s.y - wu).norm() / wu.norm() < 1e-5);
  }
  SUBCASE("reproducible") {
    const SimulatedPhenotype a = fixtures::phenotype(g, 0.1, 9);
    const SimulatedPhenotype b = fixtures::phenotype(g, 0.1, 9);
    CHECK(a.y == b.y);
    CHECK(a.truth.causal_indices == b.truth.causal_indices);
    CHECK(a.truth.effects == b.truth.effects);
  }
  SUBCASE("heritability calibration over 50 replicates") {
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      const SimulatedPhenotype s = fixtures::phenotype(g, 0.5, 1000 + rep);
      const Vector wu = x.x * s.truth.effects;
      const Vector noise = s.y - wu;
      auto var = [](const Vector& v) { return (v.array() - v.mean()).square().sum() / (v.size() - 1.0); };
      total += var(wu) / (var(wu) + var(noise));
    }
    CHECK(std::abs(total / 50.0 - 0.5) < 0.05);
  }
  SUBCASE("empty causal draws fall back to one SNP") {
    PhenoSimConfig cfg;
    cfg.pi2 = 0.0;
    cfg.seed = 4;
    const SimulatedPhenotype s = simulate_phenotype(x, cfg);
    CHECK(s.truth.causal_indices.size() == 1);
    CHECK(s.truth.forced_single_causal);
    CHECK(s.truth.draw_attempts == kMaxCausalDraws);
    CHECK(s.truth.noise_variance > 0.0);
  }
  SUBCASE("causal indices refer to genotype columns when some are dropped") {
    GenotypeMatrix h = fixtures::genotypes(60, 10, 2);
    h.dosages.col(0).setZero();
    const StandardizedGenotypes hx = standardize_genotypes(h);
    PhenoSimConfig cfg;
    cfg.pi2 = 1.0;
    const SimulatedPhenotype s = simulate_phenotype(hx, cfg);
    CHECK(s.truth.effects.size() == 10);
    CHECK(s.truth.effects(0) == 0.0);
    CHECK(s.truth.causal_indices.front() == 1);
  }
  SUBCASE("errors") {
    PhenoSimConfig cfg;
    cfg.h2 = 0.0;
    CHECK_THROWS_AS(simulate_phenotype(x, cfg), InvalidInput);
    cfg.h2 = 1.0;
    CHECK_THROWS_AS(simulate_phenotype(x, cfg), InvalidInput);
    cfg.h2 = 0.5;
    cfg.pi2 = -0.1;
    CHECK_THROWS_AS(simulate_phenotype(x, cfg), InvalidInput);
  }
}

TEST_CASE("mean_absolute_error") {
  const Matrix a = fixtures::random_matrix(7, 9, 1);
  CHECK(mean_absolute_error(a, a) == 0.0);
  CHECK(mean_absolute_error(a, a.array() - 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  const Matrix b = fixtures::random_matrix(7, 9, 2);
  long double sum = 0.0L;
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 9; ++j) sum += std::abs(static_cast<long double>(a(i, j)) - b(i, j));
  CHECK(std::abs(mean_absolute_error(a, b) - static_cast<double>(sum / 63.0L)) < 1e-15);
  CHECK_THROWS_AS(mean_absolute_error(a, b.transpose()), DimensionMismatch);
}

TEST_CASE("auc_power") {
  SUBCASE("perfect separation") {
    std::vector<double> p(20, 0.9);
    p[3] = p[7] = 1e-10;
    CHECK(auc_power(p, truth_with({3, 7}, 20)) == doctest::Approx(1.0));
  }
  SUBCASE("identical p-values") {
    const std::vector<double> p(20, 0.3);
    CHECK(auc_power(p, truth_with({0, 1, 2}, 20)) == doctest::Approx(0.5));
  }
  SUBCASE("seeded 100-SNP fixture against Mann-Whitney") {
    std::mt19937_64 rng(100);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> p(100);
    std::vector<Index> causal;
    for (Index j = 0; j < 100; ++j) {
      const bool c = j % 9 == 4;
      if (c) causal.push_back(j);
      p[static_cast<std::size_t>(j)] = c ? std::pow(unif(rng), 3.0) : unif(rng);
    }
    const double sweep = auc_power(p, truth_with(causal, 100));
    const double mw = mann_whitney_auc(p, causal);
    CHECK(std::abs(sweep - mw) < 1e-3);

    std::vector<double> root(p);
    for (double& v : root) v = std::sqrt(v);
    CHECK(std::abs(auc_power(root, truth_with(causal, 100)) - sweep) < 1e-3);
    CHECK(sweep >= 0.0);
    CHECK(sweep <= 1.0);
  }
  SUBCASE("inverted ranking gives zero") {
    std::vector<double> p(10, 1e-9);
    p[0] = 1.0;
    CHECK(auc_power(p, truth_with({0}, 10)) == doctest::Approx(0.0));
  }
  SUBCASE("errors") {
    const std::vector<double> p(5, 0.5);
    CHECK_THROWS_AS(auc_power(p, truth_with({}, 5)), UndefinedAuc);
    CHECK_THROWS_AS(auc_power(p, truth_with({0, 1, 2, 3, 4}, 5)), UndefinedAuc);
    CHECK_THROWS_AS(auc_power(p, truth_with({7}, 8)), InvalidInput);
    CHECK_THROWS_AS(auc_power(p, truth_with({1}, 5), 0.0), InvalidInput);
  }
}
