// Recursive block inversion of a symmetric positive-definite matrix into HODLR
// form.
//
// For M = [M11 M12; M21 M22] with M12 ~= U V^T:
//   S      = M22 - V (U^T M11^{-1} U) V^T
//   Z12    = -(M11^{-1} U) (S^{-1} V)^T
//   Z11    = M11^{-1} + (M11^{-1} U) (V^T S^{-1} V) (M11^{-1} U)^T
//   M^{-1} = [Z11 Z12; Z12^T S^{-1}]
//
// Diagonal blocks are never formed densely above the leaf level. Each
// recursion level sees its block as `base - W C W^T`, where base is a window
// of the caller's dense matrix and W C W^T collects the Schur corrections of
// all ancestors. Off-diagonal blocks are compressed by partially pivoted
// adaptive cross approximation, which only evaluates O(rank) rows and columns,
// followed by an SVD recompression of the cross factors.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <fmt/format.h>

#include "hodlmm/error.hpp"
#include "hodlmm/hodlr.hpp"

namespace hodlmm {
namespace {

// Fraction of epsilon spent on the cross-approximation stopping rule; the
// remainder goes to SVD truncation of the cross factors.
constexpr double kCrossShare = 0.1;
// Frobenius budget (relative to epsilon) for discarding directions of the
// accumulated Schur correction.
constexpr double kCorrectionShare = 0.1;
// Consecutive negligible pivot rows after which a block is declared exhausted.
constexpr Index kMaxNegligibleRows = 8;
// Random rows inspected before accepting convergence.
constexpr Index kVerifyRows = 4;

struct SchurView {
  const Matrix* base = nullptr;
  Index offset = 0;
  Index n = 0;
  Matrix w;   // n x r
  Matrix c;   // r x r, symmetric
  Matrix wc;  // w * c

  // this block = base(offset.., offset..) - wc * w^T
  Index rank() const { return w.cols(); }

  Vector offdiag_row(Index i, Index n1) const {
    const Index n2 = n - n1;
    Vector r = base->row(offset + i).segment(offset + n1, n2).transpose();
    if (rank() > 0) r.noalias() -= w.bottomRows(n2) * wc.row(i).transpose();
    return r;
  }

  Vector offdiag_col(Index j, Index n1) const {
    Vector col = base->col(offset + n1 + j).segment(offset, n1);
    if (rank() > 0) col.noalias() -= wc.topRows(n1) * w.row(n1 + j).transpose();
    return col;
  }

  Matrix materialize() const {
    Matrix d = base->block(offset, offset, n, n);
    if (rank() > 0) d.noalias() -= wc * w.transpose();
    return d;
  }
};

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

SchurView leading_view(const SchurView& v, Index n1) {
  SchurView out;
  out.base = v.base;
  out.offset = v.offset;
  out.n = n1;
  out.w = v.w.topRows(n1);
  out.c = v.c;
  out.wc = v.wc.topRows(n1);
  return out;
}

// Trailing block minus an extra correction factor * core * factor^T, with the
// combined correction reduced to its numerically relevant directions.
SchurView trailing_schur_view(const SchurView& v, Index n1, const Matrix& factor,
                              const Matrix& core, double drop_tol) {
  const Index n2 = v.n - n1;
  const Index r_old = v.rank();
  const Index r_new = factor.cols();

  Matrix w(n2, r_old + r_new);
  w << v.w.bottomRows(n2), factor;
  Matrix c = Matrix::Zero(r_old + r_new, r_old + r_new);
  c.topLeftCorner(r_old, r_old) = v.c;
  c.bottomRightCorner(r_new, r_new) = core;

  SchurView out;
  out.base = v.base;
  out.offset = v.offset + n1;
  out.n = n2;

  if (w.cols() == 0) {
    out.w = std::move(w);
    out.c = std::move(c);
    out.wc = Matrix(n2, 0);
    return out;
  }

  // w c w^T = Q (R c R^T) Q^T; keep eigen-directions of the small core
  // until the discarded Frobenius mass would exceed drop_tol.
  Eigen::HouseholderQR<Matrix> qr(w);
  const Index k = std::min(n2, w.cols());
  Matrix q = qr.householderQ() * Matrix::Identity(n2, k);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(r * c * r.transpose()));
  const Vector& mu = eig.eigenvalues();

  std::vector<Index> order(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return std::abs(mu(a)) < std::abs(mu(b)); });
  double dropped = 0.0;
  std::size_t first_kept = 0;
  while (first_kept < order.size()) {
    const double m2 = mu(order[first_kept]) * mu(order[first_kept]);
    if (dropped + m2 >= drop_tol * drop_tol) break;
    dropped += m2;
    ++first_kept;
  }
  std::vector<Index> kept(order.begin() + static_cast<std::ptrdiff_t>(first_kept), order.end());
  std::sort(kept.begin(), kept.end());

  const Index kk = static_cast<Index>(kept.size());
  out.w.resize(n2, kk);
  out.c = Matrix::Zero(kk, kk);
  for (Index i = 0; i < kk; ++i) {
    out.w.col(i) = q * eig.eigenvectors().col(kept[static_cast<std::size_t>(i)]);
    out.c(i, i) = mu(kept[static_cast<std::size_t>(i)]);
  }
  out.wc = out.w * out.c;
  return out;
}

struct CrossFactors {
  Matrix u;
  Matrix v;
  double residual = 0.0;  // estimated Frobenius residual
};

// Partially pivoted adaptive cross approximation of the n1 x n2 upper
// off-diagonal block of `view`.
CrossFactors cross_approx(const SchurView& view, Index n1, double tol, Index cap) {
  const Index m = n1;
  const Index p = view.n - n1;
  std::vector<Vector> us;
  std::vector<Vector> vs;
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(view.offset * 131071 + m));

  auto residual_row = [&](Index i) {
    Vector r = view.offdiag_row(i, n1);
    for (std::size_t t = 0; t < us.size(); ++t) r -= us[t](i) * vs[t];
    return r;
  };
  auto residual_col = [&](Index j) {
    Vector c = view.offdiag_col(j, n1);
    for (std::size_t t = 0; t < us.size(); ++t) c -= vs[t](j) * us[t];
    return c;
  };
  auto next_unused = [&]() -> Index {
    std::vector<Index> free;
    for (Index i = 0; i < m; ++i) {
      if (!used[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    if (free.empty()) return -1;
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    return free[pick(rng)];
  };

  // A row whose residual is this small contributes at most (tol*share)^2/m
  // to the block's squared residual.
  const double row_negligible = kCrossShare * tol / std::sqrt(static_cast<double>(m));
  double estimate = 0.0;
  Index negligible = 0;
  Index pivot = 0;
  bool converged = false;

  while (static_cast<Index>(us.size()) < cap) {
    used[static_cast<std::size_t>(pivot)] = 1;
    Vector row = residual_row(pivot);
    if (row.norm() <= row_negligible) {
      if (++negligible >= std::min(kMaxNegligibleRows, m)) {
        converged = true;
        estimate = row_negligible * std::sqrt(static_cast<double>(m));
        break;
      }
      pivot = next_unused();
      if (pivot < 0) {
        converged = true;
        break;
      }
      continue;
    }
    negligible = 0;

    Index jstar = 0;
    row.cwiseAbs().maxCoeff(&jstar);
    Vector v = row / row(jstar);
    Vector u = residual_col(jstar);
    const double term = u.norm() * v.norm();
    us.push_back(std::move(u));
    vs.push_back(std::move(v));

    if (term < kCrossShare * tol) {
      // Spot-check a few unused rows before trusting the stopping rule.
      double sampled = 0.0;
      double worst = -1.0;
      Index worst_row = -1;
      Index checked = 0;
      for (Index s = 0; s < kVerifyRows; ++s) {
        const Index i = next_unused();
        if (i < 0) break;
        const double rn = residual_row(i).norm();
        sampled += rn * rn;
        ++checked;
        if (rn > worst) {
          worst = rn;
          worst_row = i;
        }
      }
      const double extrapolated =
          checked > 0 ? std::sqrt(sampled * static_cast<double>(m) / static_cast<double>(checked))
                      : 0.0;
      if (extrapolated < kCrossShare * tol) {
        converged = true;
        estimate = std::max(term, extrapolated);
        break;
      }
      pivot = worst_row;
      continue;
    }

    Index best = -1;
    double best_abs = -1.0;
    const Vector& last = us.back();
    for (Index i = 0; i < m; ++i) {
      if (!used[static_cast<std::size_t>(i)] && std::abs(last(i)) > best_abs) {
        best_abs = std::abs(last(i));
        best = i;
      }
    }
    if (best < 0) {
      converged = true;
      break;
    }
    pivot = best;
  }

  const Index k = static_cast<Index>(us.size());
  if (!converged && k < std::min(m, p)) {
    // Cap reached below full rank: measure the residual on a probe row set.
    double sampled = 0.0;
    const Index probes = std::min<Index>(m, 16);
    for (Index s = 0; s < probes; ++s) {
      const double rn = residual_row((s * m) / probes).norm();
      sampled += rn * rn;
    }
    const double achieved =
        std::sqrt(sampled * static_cast<double>(m) / static_cast<double>(probes));
    if (!(achieved < tol)) {
      throw ToleranceUnreachable(
          fmt::format("rank cap {} reached at block offset {} with estimated residual {:.3e}", cap,
                      view.offset, achieved),
          achieved);
    }
    estimate = achieved;
  }

  CrossFactors out;
  out.u.resize(m, k);
  out.v.resize(p, k);
  for (Index t = 0; t < k; ++t) {
    out.u.col(t) = us[static_cast<std::size_t>(t)];
    out.v.col(t) = vs[static_cast<std::size_t>(t)];
  }
  out.residual = estimate;
  return out;
}

// Truncated re-factorization of u v^T: QR of both factors, SVD of the small
// core, cut at the smallest rank whose tail norm is below tol.
LowRankBlock recompress(const Matrix& u, const Matrix& v, double tol, std::optional<Index> cap) {
  const Index m = u.rows();
  const Index p = v.rows();
  if (u.cols() == 0) return {Matrix(m, 0), Matrix(p, 0), 0.0};

  Eigen::HouseholderQR<Matrix> qu(u);
  Eigen::HouseholderQR<Matrix> qv(v);
  const Index ku = std::min(m, u.cols());
  const Index kv = std::min(p, v.cols());
  Matrix ru = qu.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
  Matrix rv = qv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Matrix> svd(ru * rv.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const Index full = sigma.size();

  Vector tail(full + 1);
  tail(full) = 0.0;
  for (Index i = full - 1; i >= 0; --i) tail(i) = tail(i + 1) + sigma(i) * sigma(i);
  Index rank = 0;
  while (rank < full && !(tail(rank) < tol * tol)) ++rank;
  if (cap && rank > *cap) {
    const double achieved = std::sqrt(tail(*cap));
    throw ToleranceUnreachable(
        fmt::format("rank cap {} reached with Frobenius residual {:.3e}", *cap, achieved),
        achieved);
  }

  LowRankBlock out;
  Matrix qum = qu.householderQ() * Matrix::Identity(m, ku);
  Matrix qvm = qv.householderQ() * Matrix::Identity(p, kv);
  out.u = qum * (svd.matrixU().leftCols(rank) * sigma.head(rank).asDiagonal());
  out.v = qvm * svd.matrixV().leftCols(rank);
  out.residual = std::sqrt(tail(rank));
  return out;
}

// h += w * d * w^T for symmetric d, recompressing every off-diagonal block.
void add_symmetric_update(HodlrMatrix& h, const Matrix& w, const Matrix& d,
                          const HodlrConfig& cfg) {
  if (h.is_leaf()) {
    Matrix& block = h.mutable_leaf().block;
    block.noalias() += w * d * w.transpose();
    block = symmetrized(block);
    return;
  }
  auto& br = h.mutable_branch();
  const Index n1 = br.a11->size();
  const Index n2 = br.a22->size();
  const Index r0 = br.b12.rank();
  const Index r1 = w.cols();

  Matrix u(n1, r0 + r1);
  u << br.b12.u, w.topRows(n1) * d;
  Matrix v(n2, r0 + r1);
  v << br.b12.v, w.bottomRows(n2);
  const double previous = br.b12.residual;
  br.b12 = recompress(u, v, cfg.epsilon, cfg.rank_cap);
  br.b12.residual += previous;

  add_symmetric_update(*br.a11, w.topRows(n1), d, cfg);
  add_symmetric_update(*br.a22, w.bottomRows(n2), d, cfg);
}

HodlrMatrix invert_node(const SchurView& view, Index level, const HodlrConfig& cfg) {
  const Index n = view.n;
  if (n <= cfg.min_block) {
    const Matrix d = symmetrized(view.materialize());
    // Pivoted LDL^T; unlike LLT it inverts diagonal blocks exactly.
    Eigen::LDLT<Matrix> ldlt(d);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      throw NumericalSingularity(
          fmt::format("diagonal block at offset {} (size {}) is not positive definite",
                      view.offset, n),
          static_cast<std::size_t>(view.offset), static_cast<std::size_t>(n));
    }
    Matrix inv = ldlt.solve(Matrix::Identity(n, n));
    if (!inv.allFinite()) {
      throw NumericalSingularity(
          fmt::format("diagonal block at offset {} (size {}) is numerically singular",
                      view.offset, n),
          static_cast<std::size_t>(view.offset), static_cast<std::size_t>(n));
    }
    return HodlrMatrix(level, HodlrMatrix::Leaf{symmetrized(inv)});
  }

  const Index n1 = (n + 1) / 2;
  const Index n2 = n - n1;
  const Index full = std::min(n1, n2);
  const Index cap = cfg.rank_cap ? std::min(*cfg.rank_cap, full) : full;

  const CrossFactors cross = cross_approx(view, n1, cfg.epsilon, cap);
  const double budget = std::max(cfg.epsilon - cross.residual, 0.5 * cfg.epsilon);
  LowRankBlock m12 = recompress(cross.u, cross.v, budget, cfg.rank_cap);

  HodlrMatrix inv11 = invert_node(leading_view(view, n1), level + 1, cfg);
  const Matrix w = hodlr_apply(inv11, m12.u);
  const Matrix core = symmetrized(m12.u.transpose() * w);

  HodlrMatrix inv_s = invert_node(
      trailing_schur_view(view, n1, m12.v, core, kCorrectionShare * cfg.epsilon), level + 1, cfg);
  const Matrix y = hodlr_apply(inv_s, m12.v);
  const Matrix d = symmetrized(m12.v.transpose() * y);

  add_symmetric_update(inv11, w, d, cfg);

  HodlrMatrix::Branch branch;
  branch.b12 = recompress(-w, y, cfg.epsilon, cfg.rank_cap);
  branch.a11 = std::make_unique<HodlrMatrix>(std::move(inv11));
  branch.a22 = std::make_unique<HodlrMatrix>(std::move(inv_s));
  return HodlrMatrix(level, std::move(branch));
}

}  // namespace

HodlrMatrix hodlr_inverse(const Matrix& m, const HodlrConfig& cfg) {
  cfg.validate();
  if (m.rows() != m.cols()) {
    throw InvalidInput(
        fmt::format("hodlr_inverse: matrix is {}x{}, not square", m.rows(), m.cols()));
  }
  if (m.rows() == 0) throw InvalidInput("hodlr_inverse: empty matrix");
  if (!m.allFinite()) throw InvalidInput("hodlr_inverse: non-finite entry");

  SchurView root;
  root.base = &m;
  root.offset = 0;
  root.n = m.rows();
  root.w = Matrix(m.rows(), 0);
  root.c = Matrix(0, 0);
  root.wc = Matrix(m.rows(), 0);
  return invert_node(root, 0, cfg);
}

}  // namespace hodlmm
