#include "hodlmm/hodlr.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "hodlmm/error.hpp"

namespace hodlmm {

void HodlrConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInput(fmt::format("epsilon must be positive, got {}", epsilon));
  }
  if (min_block < 2) {
    throw InvalidInput(fmt::format("min_block must be at least 2, got {}", min_block));
  }
  if (rank_cap && *rank_cap < 0) {
    throw InvalidInput("rank_cap must be non-negative");
  }
}

HodlrMatrix::HodlrMatrix(Index level, Leaf leaf)
    : size_(leaf.block.rows()), level_(level), node_(std::move(leaf)) {}

HodlrMatrix::HodlrMatrix(Index level, Branch branch)
    : size_(branch.a11->size() + branch.a22->size()), level_(level), node_(std::move(branch)) {}

HodlrMatrix::~HodlrMatrix() = default;

Index HodlrMatrix::depth() const {
  if (is_leaf()) return 0;
  return 1 + std::max(a11().depth(), a22().depth());
}

Index HodlrMatrix::max_rank() const {
  if (is_leaf()) return 0;
  return std::max({b12().rank(), a11().max_rank(), a22().max_rank()});
}

std::size_t HodlrMatrix::storage() const {
  if (is_leaf()) return static_cast<std::size_t>(leaf().block.size());
  return static_cast<std::size_t>(b12().u.size() + b12().v.size()) + a11().storage() +
         a22().storage();
}

LowRankBlock low_rank_approx(const Matrix& block, double epsilon, std::optional<Index> rank_cap) {
  if (!(epsilon > 0.0)) throw InvalidInput("low_rank_approx: epsilon must be positive");
  if (!block.allFinite()) throw InvalidInput("low_rank_approx: non-finite block entry");

  const Index m = block.rows();
  const Index p = block.cols();
  const Index full = std::min(m, p);
  if (full == 0 || block.isZero(0.0)) {
    return {Matrix(m, 0), Matrix(p, 0), 0.0};
  }

  Eigen::BDCSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();

  // tail[k] = sum of sigma_i^2 for i >= k
  Vector tail(full + 1);
  tail(full) = 0.0;
  for (Index i = full - 1; i >= 0; --i) tail(i) = tail(i + 1) + sigma(i) * sigma(i);

  const double eps2 = epsilon * epsilon;
  Index rank = 0;
  while (rank < full && !(tail(rank) < eps2)) ++rank;

  const Index cap = rank_cap ? std::min(*rank_cap, full) : full;
  if (rank > cap) {
    const double achieved = std::sqrt(tail(cap));
    throw ToleranceUnreachable(
        fmt::format("rank cap {} reached with Frobenius residual {:.3e} >= epsilon {:.3e}", cap,
                    achieved, epsilon),
        achieved);
  }

  LowRankBlock out;
  out.u = svd.matrixU().leftCols(rank) * sigma.head(rank).asDiagonal();
  out.v = svd.matrixV().leftCols(rank);
  out.residual = std::sqrt(tail(rank));
  return out;
}

namespace {

HodlrMatrix build_node(const Matrix& m, Index offset, Index n, Index level,
                       const HodlrConfig& cfg) {
  if (n <= cfg.min_block) {
    return HodlrMatrix(level, HodlrMatrix::Leaf{m.block(offset, offset, n, n)});
  }
  const Index n1 = (n + 1) / 2;
  const Index n2 = n - n1;
  HodlrMatrix::Branch branch;
  branch.b12 = low_rank_approx(m.block(offset, offset + n1, n1, n2), cfg.epsilon, cfg.rank_cap);
  branch.a11 = std::make_unique<HodlrMatrix>(build_node(m, offset, n1, level + 1, cfg));
  branch.a22 = std::make_unique<HodlrMatrix>(build_node(m, offset + n1, n2, level + 1, cfg));
  return HodlrMatrix(level, std::move(branch));
}

void fill_dense(const HodlrMatrix& h, Index offset, Matrix& out) {
  if (h.is_leaf()) {
    out.block(offset, offset, h.size(), h.size()) = h.leaf().block;
    return;
  }
  const Index n1 = h.a11().size();
  const Index n2 = h.a22().size();
  const Matrix upper = h.b12().to_dense();
  out.block(offset, offset + n1, n1, n2) = upper;
  out.block(offset + n1, offset, n2, n1) = upper.transpose();
  fill_dense(h.a11(), offset, out);
  fill_dense(h.a22(), offset + n1, out);
}

void apply_into(const HodlrMatrix& h, const Eigen::Ref<const Matrix>& x, Eigen::Ref<Matrix> y) {
  if (h.is_leaf()) {
    y.noalias() = h.leaf().block * x;
    return;
  }
  const Index n1 = h.a11().size();
  const Index n2 = h.a22().size();
  const LowRankBlock& b = h.b12();
  apply_into(h.a11(), x.topRows(n1), y.topRows(n1));
  apply_into(h.a22(), x.bottomRows(n2), y.bottomRows(n2));
  if (b.rank() > 0) {
    const Matrix vx = b.v.transpose() * x.bottomRows(n2);
    const Matrix ux = b.u.transpose() * x.topRows(n1);
    y.topRows(n1).noalias() += b.u * vx;
    y.bottomRows(n2).noalias() += b.v * ux;
  }
}

void dump_node(std::ostream& out, const HodlrMatrix& h, Index offset) {
  if (h.is_leaf()) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\tleaf\t{}\t0\n", h.level(), offset, offset, h.size(),
                       h.size(), h.size());
    return;
  }
  const Index n1 = h.a11().size();
  const LowRankBlock& b = h.b12();
  out << fmt::format("{}\t{}\t{}\t{}\t{}\tlowrank\t{}\t{:.6e}\n", h.level(), offset, offset + n1,
                     b.rows(), b.cols(), b.rank(), b.residual);
  dump_node(out, h.a11(), offset);
  dump_node(out, h.a22(), offset + n1);
}

}  // namespace

HodlrMatrix build_hodlr(const Matrix& m, const HodlrConfig& cfg) {
  cfg.validate();
  if (m.rows() != m.cols()) {
    throw InvalidInput(fmt::format("build_hodlr: matrix is {}x{}, not square", m.rows(), m.cols()));
  }
  if (m.rows() == 0) throw InvalidInput("build_hodlr: empty matrix");
  if (!m.allFinite()) throw InvalidInput("build_hodlr: non-finite entry");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw InvalidInput(fmt::format("build_hodlr: matrix not symmetric (max |m - m^T| = {:.3e})", asym));
  }
  return build_node(m, 0, m.rows(), 0, cfg);
}

Matrix to_dense(const HodlrMatrix& h) {
  Matrix out(h.size(), h.size());
  fill_dense(h, 0, out);
  return out;
}

Matrix hodlr_apply(const HodlrMatrix& h, const Matrix& x) {
  if (x.rows() != h.size()) {
    throw InvalidInput(
        fmt::format("hodlr_apply: operand has {} rows, matrix size is {}", x.rows(), h.size()));
  }
  Matrix y(x.rows(), x.cols());
  apply_into(h, x, y);
  return y;
}

Vector hodlr_matvec(const HodlrMatrix& h, const Vector& x) {
  if (x.size() != h.size()) {
    throw InvalidInput(
        fmt::format("hodlr_matvec: vector length {} != matrix size {}", x.size(), h.size()));
  }
  Matrix y(x.size(), 1);
  apply_into(h, x, y);
  return y.col(0);
}

double frobenius_error(const HodlrMatrix& h, const Matrix& m) {
  if (m.rows() != h.size() || m.cols() != h.size()) {
    throw DimensionMismatch(fmt::format("frobenius_error: {}x{} vs HODLR size {}", m.rows(),
                                        m.cols(), h.size()));
  }
  return (to_dense(h) - m).norm();
}

void dump_tree(std::ostream& out, const HodlrMatrix& h) {
  out << "level\trow\tcol\trows\tcols\tkind\trank\tresidual\n";
  dump_node(out, h, 0);
}

}  // namespace hodlmm
