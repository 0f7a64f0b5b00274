#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "hodlmm/cli.hpp"
#include "hodlmm/error.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitDimension = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitIo = 5;

int exit_code(hodlmm::ErrorClass cls) {
  switch (cls) {
    case hodlmm::ErrorClass::parse: return kExitParse;
    case hodlmm::ErrorClass::dimension: return kExitDimension;
    case hodlmm::ErrorClass::numerical: return kExitNumerical;
    case hodlmm::ErrorClass::io: return kExitIo;
  }
  return 1;
}

void add_hodlr_flags(CLI::App* cmd, hodlmm::HodlrConfig& cfg) {
  cmd->add_option("--epsilon", cfg.epsilon, "Frobenius tolerance per off-diagonal block")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--min-block", cfg.min_block, "largest diagonal block kept dense")
      ->capture_default_str()
      ->check(CLI::Range(hodlmm::Index{2}, std::numeric_limits<hodlmm::Index>::max()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-model association scans with a HODLR covariance inverse"};
  app.require_subcommand(1);

  hodlmm::SimulateArgs sim;
  std::string sim_out = ".";
  auto* simulate = app.add_subcommand("simulate", "simulate genotypes, a phenotype and its truth file");
  simulate->add_option("-n,--samples", sim.geno.n, "individuals")->capture_default_str();
  simulate->add_option("-p,--snps", sim.geno.p, "SNPs")->capture_default_str();
  simulate->add_option("--allele-prob", sim.geno.allele_prob, "per-allele probability")->capture_default_str();
  simulate->add_option("--h2", sim.pheno.h2, "heritability")->capture_default_str();
  simulate->add_option("--pi2", sim.pheno.pi2, "fraction of causal SNPs")->capture_default_str();
  std::uint64_t sim_seed = 1;
  simulate->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "output directory")->capture_default_str();

  hodlmm::ScanArgs sc;
  std::string geno_path;
  std::string pheno_path;
  std::string covar_path;
  std::string scan_out = "results.tsv";
  double h2_override = -1.0;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  auto* scan = app.add_subcommand("scan", "association scan of every SNP");
  scan->add_option("--geno", geno_path, "genotype TSV")->required();
  scan->add_option("--pheno", pheno_path, "phenotype TSV")->required();
  scan->add_option("--covar", covar_path, "covariate TSV");
  add_hodlr_flags(scan, sc.hodlr);
  auto* h2_opt = scan->add_option("--h2-override", h2_override, "fixed h2 in [0, 1) instead of PCGC");
  scan->add_option("--workers", workers, "SNP worker threads")->capture_default_str();
  scan->add_option("--out", scan_out, "results TSV")->capture_default_str();

  hodlmm::BenchmarkArgs bench;
  std::string bench_out;
  auto* benchmark = app.add_subcommand("benchmark", "time HODLR against dense inversion");
  benchmark->add_option("--sizes", bench.sizes, "sample sizes")->delimiter(',')->capture_default_str();
  benchmark->add_option("--repeats", bench.repeats, "timed repeats per size")->capture_default_str();
  benchmark->add_option("--snps", bench.snps, "SNPs per simulated GSM")->capture_default_str();
  benchmark->add_option("--h2", bench.h2, "heritability setting lambda")->capture_default_str();
  benchmark->add_option("--seed", bench.seed, "random seed")->capture_default_str();
  add_hodlr_flags(benchmark, bench.hodlr);
  benchmark->add_option("--out", bench_out, "report TSV (default: stdout)");

  std::string plot_in;
  std::string plot_out = "manhattan.svg";
  auto* plot = app.add_subcommand("plot", "Manhattan plot of a results file");
  plot->add_option("results", plot_in, "results TSV")->required();
  plot->add_option("--out", plot_out, "SVG output")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      sim.geno.seed = sim_seed;
      // Distinct stream for the phenotype so changing p does not reuse draws.
      sim.pheno.seed = sim_seed ^ 0x9e3779b97f4a7c15ULL;
      sim.out_dir = sim_out;
      hodlmm::cmd_simulate(sim, std::cerr);
    } else if (scan->parsed()) {
      sc.genotypes = geno_path;
      sc.phenotype = pheno_path;
      if (!covar_path.empty()) sc.covariates = covar_path;
      if (*h2_opt) sc.h2_override = h2_override;
      sc.workers = workers;
      sc.out = scan_out;
      hodlmm::cmd_scan(sc, std::cerr);
    } else if (benchmark->parsed()) {
      const auto report = hodlmm::run_benchmark(bench);
      if (bench_out.empty()) {
        hodlmm::write_benchmark(std::cout, report);
      } else {
        std::ofstream out(bench_out);
        if (!out) throw hodlmm::IoError(fmt::format("cannot open '{}' for writing", bench_out));
        hodlmm::write_benchmark(out, report);
      }
    } else if (plot->parsed()) {
      const auto rows = hodlmm::read_results(plot_in);
      std::ofstream out(plot_out);
      if (!out) throw hodlmm::IoError(fmt::format("cannot open '{}' for writing", plot_out));
      const auto summary = hodlmm::render_manhattan(rows, out);
      fmt::print("hits\t{}\n", summary.hits);
    }
  } catch (const hodlmm::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
