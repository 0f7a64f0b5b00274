#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <unistd.h>

#include <Eigen/QR>

#include "doctest.h"
#include "fixtures.hpp"
#include "hodlmm/cli.hpp"
#include "hodlmm/error.hpp"
#include "hodlmm/io.hpp"

using namespace hodlmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("hodlmm_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string body_of(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') continue;
    out += line + "\n";
  }
  return out;
}

template <class F>
ParseError parse_error_of(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError("", 0, 0);
}

}  // namespace

TEST_CASE("genotype TSV") {
  SUBCASE("round trip") {
    const GenotypeMatrix g = fixtures::genotypes(12, 7, 3);
    std::stringstream s;
    write_genotypes(s, g);
    const GenotypeMatrix back = parse_genotypes(s, "mem");
    CHECK(back.sample_ids == g.sample_ids);
    CHECK(back.snp_ids == g.snp_ids);
    CHECK(back.dosages == g.dosages);
  }
  SUBCASE("header shape") {
    std::istringstream in("id\tsnp_1\tsnp_2\nA\t0\t2\nB\t1\t1\n");
    const GenotypeMatrix g = parse_genotypes(in, "mem");
    CHECK(g.n() == 2);
    CHECK(g.p() == 2);
    CHECK(g.dosages(0, 1) == 2);
  }
  SUBCASE("bad cell reports line and column") {
    const ParseError e = parse_error_of([] {
      std::istringstream in("id\ta\tb\nx\t0\t1\ny\t2\tNA\n");
      parse_genotypes(in, "mem");
    });
    CHECK(e.line() == 3);
    CHECK(e.column() == 5);
    CHECK(std::string(e.what()).find("mem:3:5") != std::string::npos);
  }
  SUBCASE("other parse failures") {
    for (const char* text : {"", "id\n", "id\ta\nx\t3\n", "id\ta\nx\t0\t1\n", "id\ta\tb\nx\t0\n",
                             "id\ta\n", "id\ta\nx\t-1\n", "id\ta\nx\t1.0\n"}) {
      std::istringstream in(text);
      CHECK_THROWS_AS(parse_genotypes(in, "mem"), ParseError);
    }
    std::istringstream dup("id\ta\ta\nx\t0\t1\n");
    CHECK_THROWS_AS(parse_genotypes(dup, "mem"), InvalidInput);
  }
  CHECK_THROWS_AS(read_genotypes("/nonexistent/geno.tsv"), IoError);
}

TEST_CASE("phenotype TSV") {
  std::istringstream genotype_text("id\ts\nA\t0\nB\t1\nC\t2\n");
  const GenotypeMatrix g = parse_genotypes(genotype_text, "mem");

  SUBCASE("header optional and order normalized") {
    std::istringstream with("id\tvalue\nC\t3.5\nA\t1e-3\nB\t-2\n");
    const Vector y = align_phenotype(parse_phenotype(with, "mem"), g);
    CHECK(y(0) == 1e-3);
    CHECK(y(1) == -2.0);
    CHECK(y(2) == 3.5);
    std::istringstream without("A\t1\nB\t2\nC\t3\n");
    CHECK(align_phenotype(parse_phenotype(without, "mem"), g) == Vector::LinSpaced(3, 1, 3));
  }
  SUBCASE("round trip is exact") {
    const Vector v = fixtures::random_vector(3, 1);
    std::stringstream s;
    write_phenotype(s, g.sample_ids, v);
    CHECK(align_phenotype(parse_phenotype(s, "mem"), g) == v);
  }
  SUBCASE("errors") {
    std::istringstream missing("A\t1\nB\t2\nD\t3\n");
    CHECK_THROWS_AS(align_phenotype(parse_phenotype(missing, "mem"), g), DimensionMismatch);
    std::istringstream short_file("A\t1\nB\t2\n");
    CHECK_THROWS_AS(align_phenotype(parse_phenotype(short_file, "mem"), g), DimensionMismatch);
    std::istringstream bad("A\t1\nB\tx\n");
    const ParseError e = parse_error_of([&] { parse_phenotype(bad, "mem"); });
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
    std::istringstream nan("A\tnan\n");
    CHECK_THROWS_AS(parse_phenotype(nan, "mem"), ParseError);
    std::istringstream dup("A\t1\nA\t2\n");
    CHECK_THROWS_AS(parse_phenotype(dup, "mem"), InvalidInput);
    std::istringstream fields("A\t1\t2\n");
    CHECK_THROWS_AS(parse_phenotype(fields, "mem"), ParseError);
  }
}

TEST_CASE("covariate TSV") {
  std::istringstream genotype_text("id\ts\nA\t0\nB\t1\nC\t2\n");
  const GenotypeMatrix g = parse_genotypes(genotype_text, "mem");
  std::istringstream in("id\tage\tsex\nB\t40\t1\nA\t30\t0\nC\t50\t1\n");
  const Matrix c = parse_covariates(in, "mem", g);
  CHECK(c.rows() == 3);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == 30.0);
  CHECK(c(1, 0) == 40.0);
  CHECK(c(2, 1) == 1.0);
  std::istringstream bad("id\tage\nA\t1\nB\n");
  CHECK_THROWS_AS(parse_covariates(bad, "mem", g), ParseError);
}

TEST_CASE("results TSV") {
  ScanResult r;
  r.n = 10;
  r.covariate_count = 1;
  r.records.push_back({"snp_1", 0.25, 0.1, 1.5, 6.25, 0.0124193});
  r.records.push_back({"snp_2", -1.0, 0.5, 1.0, 4.0, std::numeric_limits<double>::denorm_min()});
  r.timings.push_back({"gsm", 0.5});
  std::stringstream s;
  write_results(s, r, ResultsMeta{1e-6, 64, 2, 0});
  const std::string text = s.str();
  CHECK(text.find("# seconds_gsm\t") != std::string::npos);
  CHECK(text.find("# epsilon\t1e-06\n") != std::string::npos);
  CHECK(text.find(std::string(kResultsHeader) + "\n") != std::string::npos);
  CHECK(text.find("\t1.24193e-02\n") != std::string::npos);

  const std::vector<ResultRow> rows = parse_results(s, "mem");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].snp_id == "snp_1");
  CHECK(rows[0].beta == 0.25);
  CHECK(rows[0].p_value == 1.24193e-02);
  CHECK(rows[1].p_value > 0.0);

  std::istringstream no_header("# n\t3\n");
  CHECK_THROWS_AS(parse_results(no_header, "mem"), ParseError);
  std::istringstream bad_p(std::string(kResultsHeader) + "\ns\t1\t1\t1\t1\t1.5\n");
  CHECK_THROWS_AS(parse_results(bad_p, "mem"), ParseError);
}

TEST_CASE("cmd_simulate") {
  TempDir tmp("simulate");
  SimulateArgs args;
  args.geno.n = 64;
  args.geno.p = 100;
  args.geno.seed = 1;
  args.pheno.seed = 1;
  std::ostringstream log;

  args.out_dir = tmp.path / "a";
  cmd_simulate(args, log);
  args.out_dir = tmp.path / "b";
  cmd_simulate(args, log);
  for (const char* f : {"genotypes.tsv", "phenotype.tsv", "truth.tsv"}) {
    CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
  }

  const GenotypeMatrix g = read_genotypes(tmp.path / "a" / "genotypes.tsv");
  CHECK(g.dosages == simulate_genotypes(args.geno).dosages);
  const Vector y = align_phenotype(read_phenotype(tmp.path / "a" / "phenotype.tsv"), g);
  CHECK(y == simulate_phenotype(standardize_genotypes(g), args.pheno).y);

  args.pheno.pi2 = 0.0;
  args.out_dir = tmp.path / "c";
  cmd_simulate(args, log);
  const std::string truth = slurp(tmp.path / "c" / "truth.tsv");
  CHECK(truth.find("# causal_draws\t100\n") != std::string::npos);
  CHECK(truth.find("# forced_single_causal\t1\n") != std::string::npos);
  CHECK(std::count(truth.begin(), truth.end(), '\n') == 6);
  CHECK(log.str().find("fell back") != std::string::npos);

  args.out_dir = "/proc/forbidden/dir";
  CHECK_THROWS_AS(cmd_simulate(args, log), IoError);
}

TEST_CASE("cmd_scan") {
  TempDir tmp("scan");
  SimulateArgs sim;
  sim.geno.n = 150;
  sim.geno.p = 40;
  sim.pheno.h2 = 0.3;
  sim.out_dir = tmp.path;
  std::ostringstream log;
  cmd_simulate(sim, log);

  ScanArgs args;
  args.genotypes = tmp.path / "genotypes.tsv";
  args.phenotype = tmp.path / "phenotype.tsv";
  args.hodlr.min_block = 32;

  SUBCASE("schema and determinism across workers") {
    args.workers = 1;
    args.out = tmp.path / "w1.tsv";
    cmd_scan(args, log);
    args.workers = 4;
    args.out = tmp.path / "w4.tsv";
    cmd_scan(args, log);
    const std::string one = slurp(tmp.path / "w1.tsv");
    CHECK(body_of(one) == body_of(slurp(tmp.path / "w4.tsv")));

    const auto rows = read_results(tmp.path / "w1.tsv");
    CHECK(rows.size() == 40);
    const std::regex pfmt(R"(\t\d\.\d{5}e[+-]\d{2,3}$)");
    std::istringstream lines(body_of(one));
    std::string line;
    std::getline(lines, line);
    CHECK(line == kResultsHeader);
    while (std::getline(lines, line)) CHECK(std::regex_search(line, pfmt));
    CHECK(one.find("# seconds_hodlr_inverse\t") != std::string::npos);
    CHECK(one.find("# lambda\t") != std::string::npos);
  }
  SUBCASE("h2 override 0 reproduces per-SNP OLS") {
    args.h2_override = 0.0;
    args.out = tmp.path / "ols.tsv";
    cmd_scan(args, log);
    const auto rows = read_results(args.out);
    const GenotypeMatrix g = read_genotypes(args.genotypes);
    const Vector y = align_phenotype(read_phenotype(args.phenotype), g);
    const StandardizedGenotypes x = standardize_genotypes(g);
    for (Index j = 0; j < x.x.cols(); ++j) {
      Matrix d(g.n(), 2);
      d.col(0).setOnes();
      d.col(1) = x.x.col(j);
      const Vector b = d.colPivHouseholderQr().solve(y);
      CHECK(rows[static_cast<std::size_t>(j)].beta == doctest::Approx(b(1)).epsilon(1e-9));
    }
  }
  SUBCASE("errors") {
    std::ofstream(tmp.path / "short.tsv") << "ind_1\t1\nind_2\t2\n";
    args.phenotype = tmp.path / "short.tsv";
    args.out = tmp.path / "x.tsv";
    CHECK_THROWS_AS(cmd_scan(args, log), DimensionMismatch);
    args.phenotype = tmp.path / "missing.tsv";
    CHECK_THROWS_AS(cmd_scan(args, log), IoError);
  }
}

TEST_CASE("render_manhattan") {
  auto rows_with = [](std::vector<double> ps) {
    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      ResultRow r;
      r.snp_id = "s" + std::to_string(i);
      r.p_value = ps[i];
      rows.push_back(r);
    }
    return rows;
  };
  std::ostringstream svg;
  CHECK(render_manhattan(rows_with({1.0, 1.0, 1.0}), svg).hits == 0);

  std::ostringstream one;
  const PlotSummary s = render_manhattan(rows_with({0.5, 1e-10, 0.02}), one);
  CHECK(s.hits == 1);
  CHECK(s.points == 3);
  const std::string text = one.str();
  CHECK(text.find("data-neglog10p=\"7.301029996\"") != std::string::npos);

  std::smatch m;
  REQUIRE(std::regex_search(text, m, std::regex(R"re(class="threshold"[^>]*y1="([0-9.]+)")re")));
  const double line_y = std::stod(m[1]);
  REQUIRE(std::regex_search(text, m, std::regex(R"re(class="hit" cx="[0-9.]+" cy="([0-9.]+)")re")));
  CHECK(std::stod(m[1]) < line_y);  // SVG y grows downward

  CHECK_THROWS_AS(render_manhattan({}, svg), InvalidInput);
}

TEST_CASE("benchmark helpers") {
  CHECK(loglog_slope({1, 2, 4, 8}, {3, 24, 192, 1536}) == doctest::Approx(3.0));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), InvalidInput);
  CHECK_THROWS_AS(loglog_slope({1, 1}, {1, 2}), InvalidInput);

  BenchmarkArgs args;
  args.sizes = {64, 128};
  args.repeats = 1;
  args.hodlr.min_block = 16;
  const BenchmarkReport report = run_benchmark(args);
  CHECK(report.rows.size() == 4);
  CHECK(report.max_mae < 1e-3);
  std::ostringstream out;
  write_benchmark(out, report);
  CHECK(body_of(out.str()).rfind("method\tn\tmedian_seconds\nhodlr\t64\t", 0) == 0);

  args.sizes = {64};
  CHECK_THROWS_AS(run_benchmark(args), InvalidInput);
}
