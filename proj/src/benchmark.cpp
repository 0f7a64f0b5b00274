#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "hodlmm/cli.hpp"
#include "hodlmm/error.hpp"
#include "hodlmm/oracle.hpp"

namespace hodlmm {

namespace {

template <class F>
double time_once(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope fit needs two or more points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("slope fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidInput("slope fit needs distinct sizes");
  return sxy / sxx;
}

BenchmarkReport run_benchmark(const BenchmarkArgs& args) {
  args.hodlr.validate();
  if (args.sizes.size() < 2) throw InvalidInput("benchmark needs at least two sizes");
  if (args.repeats < 1) throw InvalidInput("benchmark needs at least one repeat");
  if (!(args.h2 > 0.0 && args.h2 < 1.0)) throw InvalidInput("benchmark h2 must lie in (0, 1)");
  const double lambda = args.h2 / (1.0 - args.h2);

  BenchmarkReport report;
  std::vector<double> ns;
  std::vector<double> hodlr_t;
  std::vector<double> dense_t;
  for (std::size_t k = 0; k < args.sizes.size(); ++k) {
    const Index n = args.sizes[k];
    GenoSimConfig gc;
    gc.n = n;
    gc.p = args.snps;
    gc.seed = args.seed + k;
    const Matrix sigma = covariance_matrix(compute_gsm(standardize_genotypes(simulate_genotypes(gc))), lambda);

    std::vector<double> th;
    std::vector<double> td;
    for (int r = 0; r < args.repeats; ++r) {
      std::optional<HodlrMatrix> h;
      Matrix d;
      th.push_back(time_once([&] { h.emplace(hodlr_inverse(sigma, args.hodlr)); }));
      td.push_back(time_once([&] { d = dense_spd_inverse(sigma); }));
      if (r == 0) report.max_mae = std::max(report.max_mae, mean_absolute_error(to_dense(*h), d));
    }
    ns.push_back(static_cast<double>(n));
    hodlr_t.push_back(median(th));
    dense_t.push_back(median(td));
    report.rows.push_back({"hodlr", n, hodlr_t.back()});
    report.rows.push_back({"dense", n, dense_t.back()});
  }
  report.hodlr_slope = loglog_slope(ns, hodlr_t);
  report.dense_slope = loglog_slope(ns, dense_t);
  return report;
}

void write_benchmark(std::ostream& out, const BenchmarkReport& report) {
  std::string buf;
  buf += fmt::format("# slope_hodlr\t{:.4f}\n", report.hodlr_slope);
  buf += fmt::format("# slope_dense\t{:.4f}\n", report.dense_slope);
  buf += fmt::format("# max_mae\t{:.3e}\n", report.max_mae);
  buf += "method\tn\tmedian_seconds\n";
  for (const auto& row : report.rows) {
    buf += fmt::format("{}\t{}\t{:.6f}\n", row.method, row.n, row.median_seconds);
  }
  out << buf;
}

}  // namespace hodlmm
