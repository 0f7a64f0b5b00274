#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "hodlmm/cli.hpp"
#include "hodlmm/error.hpp"

namespace hodlmm {

namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 20.0;
constexpr double kBottom = 50.0;

}  // namespace

PlotSummary render_manhattan(const std::vector<ResultRow>& rows, std::ostream& svg) {
  if (rows.empty()) throw InvalidInput("cannot plot an empty results file");

  const double threshold = -std::log10(kGenomeWideP);
  std::vector<double> score(rows.size());
  double top = threshold;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    score[i] = -std::log10(rows[i].p_value);
    top = std::max(top, score[i]);
  }
  top = std::ceil(top * 1.05);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double step = plot_w / static_cast<double>(rows.size() + 1);
  auto px = [&](std::size_t i) { return kLeft + step * static_cast<double>(i + 1); };
  auto py = [&](double s) { return kTop + plot_h * (1.0 - s / top); };

  std::string buf;
  buf += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      kWidth, kHeight);
  buf += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  buf += fmt::format(
      "<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft,
      kTop, kTop + plot_h);
  buf += fmt::format(
      "<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft,
      kTop + plot_h, kLeft + plot_w);
  for (int tick = 0; tick <= static_cast<int>(top); tick += std::max(1, static_cast<int>(top) / 8)) {
    const double y = py(tick);
    buf += fmt::format(
        "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
        "<text x=\"{3}\" y=\"{4:.2f}\" font-size=\"11\" text-anchor=\"end\">{5}</text>\n",
        kLeft - 4, y, kLeft, kLeft - 6, y + 4, tick);
  }
  buf += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">SNP index</text>\n",
      kLeft + plot_w / 2, kHeight - 12);
  buf += fmt::format(
      "<text x=\"16\" y=\"{0}\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {0})\">-log10(p)</text>\n",
      kTop + plot_h / 2);

  PlotSummary summary;
  summary.points = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool hit = rows[i].p_value < kGenomeWideP;
    if (hit) ++summary.hits;
    buf += fmt::format(
        "<circle class=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{}\" fill=\"{}\"><title>{} "
        "p={:.5e}</title></circle>\n",
        hit ? "hit" : "snp", px(i), py(score[i]), hit ? 4 : 2.5, hit ? "#d62728" : "#1f4e79",
        rows[i].snp_id, rows[i].p_value);
  }

  buf += fmt::format(
      "<line class=\"threshold\" data-neglog10p=\"{:.9f}\" x1=\"{}\" y1=\"{:.4f}\" x2=\"{}\" "
      "y2=\"{:.4f}\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n",
      threshold, kLeft, py(threshold), kLeft + plot_w, py(threshold));
  buf += "</svg>\n";
  svg << buf;
  return summary;
}

}  // namespace hodlmm
