#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hodlmm/cli.hpp"
#include "hodlmm/error.hpp"

namespace hodlmm {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace

void cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  args.geno.validate();
  args.pheno.validate();
  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) {
    throw IoError(fmt::format("cannot create '{}': {}", args.out_dir.string(), ec.message()));
  }

  const GenotypeMatrix g = simulate_genotypes(args.geno);
  const StandardizedGenotypes x = standardize_genotypes(g);
  const SimulatedPhenotype sim = simulate_phenotype(x, args.pheno);

  const auto geno_path = args.out_dir / "genotypes.tsv";
  const auto pheno_path = args.out_dir / "phenotype.tsv";
  const auto truth_path = args.out_dir / "truth.tsv";
  {
    auto out = open_output(geno_path);
    write_genotypes(out, g);
    finish(out, geno_path);
  }
  {
    auto out = open_output(pheno_path);
    write_phenotype(out, g.sample_ids, sim.y);
    finish(out, pheno_path);
  }
  {
    auto out = open_output(truth_path);
    write_truth(out, sim.truth, g.snp_ids);
    finish(out, truth_path);
  }

  fmt::print(log, "simulated n={} p={} ({} monomorphic), {} causal SNPs\n", g.n(), g.p(),
             x.dropped_monomorphic.size(), sim.truth.causal_indices.size());
  if (sim.truth.draw_attempts > 1 || sim.truth.forced_single_causal) {
    fmt::print(log, "causal set redrawn: {} draws{}\n", sim.truth.draw_attempts,
               sim.truth.forced_single_causal ? ", fell back to a single random SNP" : "");
  }
}

void cmd_scan(const ScanArgs& args, std::ostream& log) {
  args.hodlr.validate();
  const GenotypeMatrix g = read_genotypes(args.genotypes);
  const Vector y = align_phenotype(read_phenotype(args.phenotype), g);

  ScanOptions opts;
  opts.hodlr = args.hodlr;
  opts.h2_override = args.h2_override;
  opts.workers = args.workers;
  if (args.covariates) opts.covariates = read_covariates(*args.covariates, g);

  const ScanResult result = scan(g, y, opts);

  ResultsMeta meta;
  meta.epsilon = args.hodlr.epsilon;
  meta.min_block = args.hodlr.min_block;
  meta.retained = static_cast<Index>(result.records.size());
  meta.dropped = static_cast<Index>(result.dropped_snps.size());

  auto out = open_output(args.out);
  write_results(out, result, meta);
  finish(out, args.out);

  fmt::print(log, "scanned {} SNPs on n={} (h2={:.4f}, lambda={:.4f}); {} monomorphic dropped\n",
             meta.retained, result.n, result.heritability.h2, result.heritability.lambda,
             meta.dropped);
}

}  // namespace hodlmm
