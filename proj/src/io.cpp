#include "hodlmm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "hodlmm/error.hpp"

namespace hodlmm {

namespace {

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Field> split_tabs(std::string_view line) {
  std::vector<Field> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    const std::size_t end = tab == std::string_view::npos ? line.size() : tab;
    out.push_back({line.substr(start, end - start), start + 1});
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

// Reads lines with LF endings, tolerating a trailing CR.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next() {
    if (!std::getline(in_, line_)) return false;
    ++number_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    return true;
  }

  const std::string& line() const { return line_; }
  std::size_t number() const { return number_; }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    throw ParseError(fmt::format("{}:{}:{}: {}", source_, number_, column, what), number_, column);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::size_t number_ = 0;
};

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  if (ec == std::errc::result_out_of_range && ptr == s.data() + s.size()) {
    // Subnormals such as a clamped p-value of 4.94066e-324 land here.
    const std::string copy(first, ptr);
    out = std::strtod(copy.c_str(), nullptr);
    return std::isfinite(out);
  }
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

double require_double(const LineReader& r, const Field& f) {
  double v = 0.0;
  if (!parse_double(f.text, v)) r.fail(f.column, fmt::format("expected a finite number, got '{}'", f.text));
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  return in;
}

void check_unique_ids(const std::vector<std::string>& ids, const std::string& what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw InvalidInput(fmt::format("duplicate {} id '{}'", what, id));
  }
}

}  // namespace

GenotypeMatrix parse_genotypes(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (!r.next()) r.fail(1, "empty genotype file");
  const auto header = split_tabs(r.line());
  if (header.size() < 2) r.fail(1, "genotype header needs an id column and at least one SNP");
  GenotypeMatrix g;
  for (std::size_t k = 1; k < header.size(); ++k) {
    if (header[k].text.empty()) r.fail(header[k].column, "empty SNP id");
    g.snp_ids.emplace_back(header[k].text);
  }
  const std::size_t p = g.snp_ids.size();

  std::vector<std::uint8_t> cells;
  while (r.next()) {
    if (r.line().empty()) continue;
    const auto fields = split_tabs(r.line());
    if (fields.size() != p + 1) {
      r.fail(fields.back().column,
             fmt::format("expected {} fields, found {}", p + 1, fields.size()));
    }
    if (fields[0].text.empty()) r.fail(1, "empty sample id");
    g.sample_ids.emplace_back(fields[0].text);
    for (std::size_t k = 1; k <= p; ++k) {
      const auto t = fields[k].text;
      if (t.size() != 1 || t[0] < '0' || t[0] > '2') {
        r.fail(fields[k].column, fmt::format("genotype must be 0, 1 or 2, got '{}'", t));
      }
      cells.push_back(static_cast<std::uint8_t>(t[0] - '0'));
    }
  }
  if (g.sample_ids.empty()) r.fail(r.number() + 1, "genotype file has no individuals");

  const auto n = static_cast<Index>(g.sample_ids.size());
  g.dosages = Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(cells.data(), n,
                                                               static_cast<Index>(p));
  g.validate();
  return g;
}

GenotypeMatrix read_genotypes(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_genotypes(in, path.string());
}

void write_genotypes(std::ostream& out, const GenotypeMatrix& g) {
  std::string buf = "id";
  for (const auto& s : g.snp_ids) {
    buf += '\t';
    buf += s;
  }
  buf += '\n';
  for (Index i = 0; i < g.n(); ++i) {
    buf += g.sample_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < g.p(); ++j) {
      buf += '\t';
      buf += static_cast<char>('0' + g.dosages(i, j));
    }
    buf += '\n';
  }
  out << buf;
}

Phenotype parse_phenotype(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<std::string> ids;
  std::vector<double> values;
  while (r.next()) {
    if (r.line().empty()) continue;
    const auto fields = split_tabs(r.line());
    if (fields.size() != 2) r.fail(fields.back().column, fmt::format("expected 2 fields, found {}", fields.size()));
    double v = 0.0;
    if (ids.empty() && values.empty() && r.number() == 1 && !parse_double(fields[1].text, v)) {
      continue;  // header
    }
    if (fields[0].text.empty()) r.fail(1, "empty sample id");
    ids.emplace_back(fields[0].text);
    values.push_back(require_double(r, fields[1]));
  }
  if (ids.empty()) r.fail(r.number() + 1, "phenotype file has no values");
  check_unique_ids(ids, "phenotype sample");
  Phenotype out;
  out.ids = std::move(ids);
  out.values = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return out;
}

Phenotype read_phenotype(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_phenotype(in, path.string());
}

void write_phenotype(std::ostream& out, const std::vector<std::string>& ids, const Vector& values) {
  if (static_cast<Index>(ids.size()) != values.size()) {
    throw DimensionMismatch("write_phenotype: id count differs from value count");
  }
  std::string buf = "id\tvalue\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    buf += fmt::format("{}\t{:.17g}\n", ids[i], values(static_cast<Index>(i)));
  }
  out << buf;
}

namespace {

std::vector<Index> match_rows(const std::vector<std::string>& ids, const GenotypeMatrix& g,
                              const char* what) {
  if (ids.size() != g.sample_ids.size()) {
    throw DimensionMismatch(fmt::format("{} has {} individuals, genotype file has {}", what,
                                        ids.size(), g.sample_ids.size()));
  }
  std::unordered_map<std::string, Index> where;
  for (std::size_t i = 0; i < ids.size(); ++i) where.emplace(ids[i], static_cast<Index>(i));
  std::vector<Index> rows;
  rows.reserve(ids.size());
  for (const auto& id : g.sample_ids) {
    const auto it = where.find(id);
    if (it == where.end()) {
      throw DimensionMismatch(fmt::format("individual '{}' missing from {}", id, what));
    }
    rows.push_back(it->second);
  }
  return rows;
}

}  // namespace

Vector align_phenotype(const Phenotype& pheno, const GenotypeMatrix& g) {
  const auto rows = match_rows(pheno.ids, g, "phenotype file");
  Vector y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Index>(i)) = pheno.values(rows[i]);
  return y;
}

Matrix parse_covariates(std::istream& in, const std::string& source, const GenotypeMatrix& g) {
  LineReader r(in, source);
  if (!r.next()) r.fail(1, "empty covariate file");
  const auto header = split_tabs(r.line());
  if (header.size() < 2) r.fail(1, "covariate header needs an id column and at least one covariate");
  const std::size_t c = header.size() - 1;

  std::vector<std::string> ids;
  std::vector<double> cells;
  while (r.next()) {
    if (r.line().empty()) continue;
    const auto fields = split_tabs(r.line());
    if (fields.size() != c + 1) {
      r.fail(fields.back().column, fmt::format("expected {} fields, found {}", c + 1, fields.size()));
    }
    ids.emplace_back(fields[0].text);
    for (std::size_t k = 1; k <= c; ++k) cells.push_back(require_double(r, fields[k]));
  }
  check_unique_ids(ids, "covariate sample");
  const auto rows = match_rows(ids, g, "covariate file");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(c));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      out(static_cast<Index>(i), static_cast<Index>(k)) =
          cells[static_cast<std::size_t>(rows[i]) * c + k];
    }
  }
  return out;
}

Matrix read_covariates(const std::filesystem::path& path, const GenotypeMatrix& g) {
  auto in = open_input(path);
  return parse_covariates(in, path.string(), g);
}

void write_truth(std::ostream& out, const SimTruth& truth, const std::vector<std::string>& snp_ids) {
  if (static_cast<Index>(snp_ids.size()) != truth.effects.size()) {
    throw DimensionMismatch("write_truth: SNP id count differs from effect vector length");
  }
  std::string buf;
  buf += fmt::format("# noise_variance\t{:.17g}\n", truth.noise_variance);
  buf += fmt::format("# genetic_variance\t{:.17g}\n", truth.genetic_variance);
  buf += fmt::format("# causal_draws\t{}\n", truth.draw_attempts);
  buf += fmt::format("# forced_single_causal\t{}\n", truth.forced_single_causal ? 1 : 0);
  buf += "index\tsnp_id\teffect\n";
  for (Index j : truth.causal_indices) {
    buf += fmt::format("{}\t{}\t{:.17g}\n", j, snp_ids[static_cast<std::size_t>(j)],
                       truth.effects(j));
  }
  out << buf;
}

void write_results(std::ostream& out, const ScanResult& result, const ResultsMeta& meta) {
  std::string buf;
  buf += fmt::format("# n\t{}\n", result.n);
  buf += fmt::format("# snps_retained\t{}\n", meta.retained);
  buf += fmt::format("# snps_dropped\t{}\n", meta.dropped);
  buf += fmt::format("# fixed_effect_columns\t{}\n", result.covariate_count);
  buf += fmt::format("# h2\t{:.10g}\n", result.heritability.h2);
  buf += fmt::format("# lambda\t{:.10g}\n", result.heritability.lambda);
  buf += fmt::format("# epsilon\t{:g}\n", meta.epsilon);
  buf += fmt::format("# min_block\t{}\n", meta.min_block);
  for (const auto& t : result.timings) {
    buf += fmt::format("# seconds_{}\t{:.6f}\n", t.phase, t.seconds);
  }
  buf += kResultsHeader;
  buf += '\n';
  for (const auto& rec : result.records) {
    buf += fmt::format("{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.5e}\n", rec.snp_id, rec.beta,
                       rec.std_error, rec.sigma_e2, rec.wald_chisq, rec.p_value);
  }
  out << buf;
}

std::vector<ResultRow> parse_results(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  bool have_header = false;
  std::vector<ResultRow> rows;
  while (r.next()) {
    const std::string& line = r.line();
    if (line.empty() || (!have_header && line.front() == '#')) continue;
    if (!have_header) {
      if (line != kResultsHeader) r.fail(1, "unexpected results header");
      have_header = true;
      continue;
    }
    const auto f = split_tabs(line);
    if (f.size() != 6) r.fail(f.back().column, fmt::format("expected 6 fields, found {}", f.size()));
    ResultRow row;
    row.snp_id = std::string(f[0].text);
    row.beta = require_double(r, f[1]);
    row.std_error = require_double(r, f[2]);
    row.sigma_e2 = require_double(r, f[3]);
    row.chisq = require_double(r, f[4]);
    row.p_value = require_double(r, f[5]);
    if (!(row.p_value > 0.0 && row.p_value <= 1.0)) r.fail(f[5].column, "p-value outside (0, 1]");
    rows.push_back(std::move(row));
  }
  if (!have_header) r.fail(r.number() + 1, "missing results header");
  return rows;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_results(in, path.string());
}

}  // namespace hodlmm
