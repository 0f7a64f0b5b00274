#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>

namespace hodlmm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tunables shared by compression and inversion.
///
/// `epsilon` is an absolute Frobenius tolerance applied to every off-diagonal
/// block independently of its level. Recursion stops once a diagonal block is
/// no larger than `min_block`.
struct HodlrConfig {
  double epsilon = 1e-6;
  Index min_block = 64;
  std::optional<Index> rank_cap;

  /// Throws InvalidInput when epsilon <= 0 or min_block < 2.
  void validate() const;
};

/// Factored block u * v^T. A rank-0 block keeps its shape through the
/// zero-column factors.
struct LowRankBlock {
  Matrix u;  // rows x rank
  Matrix v;  // cols x rank
  /// Frobenius residual against the source block, as measured (SVD path) or
  /// estimated (cross-approximation path) at compression time.
  double residual = 0.0;

  Index rows() const { return u.rows(); }
  Index cols() const { return v.rows(); }
  Index rank() const { return u.cols(); }
  Matrix to_dense() const { return u * v.transpose(); }
  LowRankBlock transposed() const { return {v, u, residual}; }
};

/// Symmetric hierarchical off-diagonal low-rank matrix.
///
/// Only the upper off-diagonal factorization is stored; the lower block is its
/// transpose. Instances are immutable once returned from the builders below
/// and may be shared across threads by const reference.
class HodlrMatrix {
 public:
  struct Leaf {
    Matrix block;
  };
  struct Branch {
    std::unique_ptr<HodlrMatrix> a11;
    std::unique_ptr<HodlrMatrix> a22;
    LowRankBlock b12;
  };

  HodlrMatrix(Index level, Leaf leaf);
  HodlrMatrix(Index level, Branch branch);

  HodlrMatrix(HodlrMatrix&&) noexcept = default;
  HodlrMatrix& operator=(HodlrMatrix&&) noexcept = default;
  ~HodlrMatrix();

  Index size() const { return size_; }
  Index level() const { return level_; }
  bool is_leaf() const { return std::holds_alternative<Leaf>(node_); }

  const Leaf& leaf() const { return std::get<Leaf>(node_); }
  const Branch& branch() const { return std::get<Branch>(node_); }
  const HodlrMatrix& a11() const { return *branch().a11; }
  const HodlrMatrix& a22() const { return *branch().a22; }
  const LowRankBlock& b12() const { return branch().b12; }
  LowRankBlock b21() const { return branch().b12.transposed(); }

  /// Number of halvings below this node along the deepest path.
  Index depth() const;
  /// Largest off-diagonal rank anywhere in the tree.
  Index max_rank() const;
  /// Stored doubles (leaf entries plus factor entries).
  std::size_t storage() const;

  // Mutable access used while assembling an inverse; not part of the
  // read-only contract above.
  Leaf& mutable_leaf() { return std::get<Leaf>(node_); }
  Branch& mutable_branch() { return std::get<Branch>(node_); }

 private:
  Index size_;
  Index level_;
  std::variant<Leaf, Branch> node_;
};

/// Smallest-rank factorization with ||u v^T - block||_F < epsilon, from one
/// full SVD truncated at the first rank whose tail norm meets the tolerance.
LowRankBlock low_rank_approx(const Matrix& block, double epsilon,
                             std::optional<Index> rank_cap = std::nullopt);

/// Partition a symmetric matrix until diagonal blocks are at most
/// cfg.min_block and compress each off-diagonal block with low_rank_approx.
HodlrMatrix build_hodlr(const Matrix& m, const HodlrConfig& cfg);

Matrix to_dense(const HodlrMatrix& h);

Vector hodlr_matvec(const HodlrMatrix& h, const Vector& x);
/// Column-wise hodlr_matvec for a block of right-hand sides.
Matrix hodlr_apply(const HodlrMatrix& h, const Matrix& x);

/// Approximate inverse of a symmetric positive-definite matrix, returned in
/// HODLR form. Off-diagonal blocks are compressed during the recursion; see
/// README for the block formula.
HodlrMatrix hodlr_inverse(const Matrix& m, const HodlrConfig& cfg);

double frobenius_error(const HodlrMatrix& h, const Matrix& m);

/// Line-oriented dump of the block tree:
/// `level row col rows cols kind rank residual`, one line per node.
void dump_tree(std::ostream& out, const HodlrMatrix& h);

}  // namespace hodlmm
