#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hodlmm/lmm.hpp"
#include "hodlmm/simgen.hpp"

namespace hodlmm {

// Tab-separated text formats. Parse errors carry 1-based line and column
// (column counts characters from the start of the line).

/// Header `id<TAB>snp_1...`, then one row per individual with cells in {0,1,2}.
GenotypeMatrix parse_genotypes(std::istream& in, const std::string& source);
GenotypeMatrix read_genotypes(const std::filesystem::path& path);
void write_genotypes(std::ostream& out, const GenotypeMatrix& g);

struct Phenotype {
  std::vector<std::string> ids;
  Vector values;
};

/// Two columns `id<TAB>value`; an optional first line `id<TAB><name>` is
/// accepted when its second field is not numeric.
Phenotype parse_phenotype(std::istream& in, const std::string& source);
Phenotype read_phenotype(const std::filesystem::path& path);
void write_phenotype(std::ostream& out, const std::vector<std::string>& ids, const Vector& values);

/// Reorders the phenotype to the genotype row order. Throws DimensionMismatch
/// unless the two id sets match one to one.
Vector align_phenotype(const Phenotype& pheno, const GenotypeMatrix& g);

/// Header `id<TAB>name1...`, one row per individual, real values; rows are
/// reordered to match the genotype file.
Matrix parse_covariates(std::istream& in, const std::string& source, const GenotypeMatrix& g);
Matrix read_covariates(const std::filesystem::path& path, const GenotypeMatrix& g);

void write_truth(std::ostream& out, const SimTruth& truth, const std::vector<std::string>& snp_ids);

struct ResultsMeta {
  double epsilon = 0.0;
  Index min_block = 0;
  Index retained = 0;
  Index dropped = 0;
};

inline constexpr const char* kResultsHeader = "snp_id\tbeta\tstderr\tsigma_e2\tchisq\tpvalue";

/// `#` metadata lines (with run timings), the column header, then one row per
/// tested SNP. Everything after the metadata depends only on the inputs.
void write_results(std::ostream& out, const ScanResult& result, const ResultsMeta& meta);

struct ResultRow {
  std::string snp_id;
  double beta = 0.0;
  double std_error = 0.0;
  double sigma_e2 = 0.0;
  double chisq = 0.0;
  double p_value = 1.0;
};

std::vector<ResultRow> parse_results(std::istream& in, const std::string& source);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

}  // namespace hodlmm
