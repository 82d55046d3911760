#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace specmatch {

using NodeId = int;

// Reverse-mode autodiff tape over dense matrices. Every operation appends a
// node holding its value and a pull-back closure; backward() walks the tape
// in strict reverse creation order, which fixes the floating-point reduction
// order and makes gradients bit-reproducible. Scalars are 1x1 matrices.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId leaf(const Eigen::MatrixXd& value, bool requires_grad);
  NodeId constant(const Eigen::MatrixXd& value) { return leaf(value, false); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_row_broadcast(NodeId m, NodeId row);   // m + ones * row
  NodeId relu(NodeId a);
  NodeId gin_combine(NodeId h, NodeId agg, NodeId eps);  // (1 + eps) * h + agg, eps 1x1
  NodeId sum_rows(NodeId a);                        // 1 x cols column sums
  NodeId vstack(const std::vector<NodeId>& parts);  // equal column counts
  NodeId normalize_rows(NodeId a, double min_norm = 1e-12);
  NodeId gram(NodeId z);                            // z * z^T
  NodeId info_nce_from_gram(NodeId g, double tau);  // 1x1; rows [0,N) and [N,2N) are the two views
  NodeId masked_clamp(NodeId s, const Eigen::MatrixXd& mask);  // max(s,0) .* mask, mask constant
  NodeId row_sums(NodeId w);                        // n x 1
  NodeId rsqrt_or_zero(NodeId d, double tol = 1e-12);
  NodeId sym_scale(NodeId w, NodeId s);             // diag(s) * w * diag(s), s is n x 1
  NodeId fro_sq_diff(NodeId a, NodeId b);           // 1x1 squared Frobenius distance
  NodeId axpy(double alpha, NodeId x, NodeId y);    // alpha * x + y
  NodeId scale(NodeId a, double c);

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(NodeId id) const { return nodes_[id].grad; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node with
  // requires_grad. The loss node must be 1x1.
  void backward(NodeId loss);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void(Tape&)> pull;  // empty for leaves
  };

  NodeId push(Eigen::MatrixXd value, bool requires_grad, std::function<void(Tape&)> pull);
  std::vector<Node> nodes_;
};

}  // namespace specmatch
