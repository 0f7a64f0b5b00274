#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hodlmm/io.hpp"
#include "hodlmm/simgen.hpp"

namespace hodlmm {

/// Genome-wide significance threshold drawn on Manhattan plots.
inline constexpr double kGenomeWideP = 5e-8;

struct SimulateArgs {
  GenoSimConfig geno;
  PhenoSimConfig pheno;
  std::filesystem::path out_dir = ".";
};

/// Writes genotypes.tsv, phenotype.tsv and truth.tsv into args.out_dir.
void cmd_simulate(const SimulateArgs& args, std::ostream& log);

struct ScanArgs {
  std::filesystem::path genotypes;
  std::filesystem::path phenotype;
  std::optional<std::filesystem::path> covariates;
  HodlrConfig hodlr;
  std::optional<double> h2_override;
  unsigned workers = 1;
  std::filesystem::path out;
};

void cmd_scan(const ScanArgs& args, std::ostream& log);

struct BenchmarkArgs {
  std::vector<Index> sizes{512, 1024, 2048, 4096};
  int repeats = 3;
  Index snps = 100;
  double h2 = 0.5;
  std::uint64_t seed = 1;
  HodlrConfig hodlr;
};

struct BenchmarkRow {
  std::string method;
  Index n = 0;
  double median_seconds = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  double hodlr_slope = 0.0;
  double dense_slope = 0.0;
  /// Largest mean absolute error between the two inverses over the grid.
  double max_mae = 0.0;
};

/// Times hodlr_inverse and dense_spd_inverse of lambda K + I on simulated
/// GSMs; slopes are least-squares fits of log(median time) on log(n).
BenchmarkReport run_benchmark(const BenchmarkArgs& args);
void write_benchmark(std::ostream& out, const BenchmarkReport& report);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct PlotSummary {
  std::size_t points = 0;
  std::size_t hits = 0;  // p < kGenomeWideP
};

/// SVG Manhattan plot with SNPs in file order. Throws InvalidInput on empty input.
PlotSummary render_manhattan(const std::vector<ResultRow>& rows, std::ostream& svg);

}  // namespace hodlmm
