#include "specmatch/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace specmatch {

namespace {

void check_same_shape(const char* op, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

void check_scalar(const char* op, const Eigen::MatrixXd& a) {
  if (a.rows() != 1 || a.cols() != 1) {
    throw std::invalid_argument(std::string(op) + ": expected 1x1 node");
  }
}

}  // namespace

NodeId Tape::push(Eigen::MatrixXd value, bool requires_grad, std::function<void(Tape&)> pull) {
  Node node;
  node.value = std::move(value);
  node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  node.requires_grad = requires_grad;
  node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::leaf(const Eigen::MatrixXd& value, bool requires_grad) {
  return push(value, requires_grad, nullptr);
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const auto& va = nodes_[a].value;
  const auto& vb = nodes_[b].value;
  if (va.cols() != vb.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(va * vb, rg, [a, b, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    if (t.nodes_[a].requires_grad) t.nodes_[a].grad.noalias() += g * t.nodes_[b].value.transpose();
    if (t.nodes_[b].requires_grad) t.nodes_[b].grad.noalias() += t.nodes_[a].value.transpose() * g;
  });
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_same_shape("add", nodes_[a].value, nodes_[b].value);
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(nodes_[a].value + nodes_[b].value, rg, [a, b, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    if (t.nodes_[a].requires_grad) t.nodes_[a].grad += g;
    if (t.nodes_[b].requires_grad) t.nodes_[b].grad += g;
  });
}

NodeId Tape::add_row_broadcast(NodeId m, NodeId row) {
  const auto& vm = nodes_[m].value;
  const auto& vr = nodes_[row].value;
  if (vr.rows() != 1 || vr.cols() != vm.cols()) {
    throw std::invalid_argument("add_row_broadcast: row must be 1 x cols");
  }
  const bool rg = nodes_[m].requires_grad || nodes_[row].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(vm.rowwise() + vr.row(0), rg, [m, row, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    if (t.nodes_[m].requires_grad) t.nodes_[m].grad += g;
    if (t.nodes_[row].requires_grad) t.nodes_[row].grad += g.colwise().sum();
  });
}

NodeId Tape::relu(NodeId a) {
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(nodes_[a].value.cwiseMax(0.0), nodes_[a].requires_grad, [a, out](Tape& t) {
    if (!t.nodes_[a].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    const Eigen::MatrixXd& v = t.nodes_[a].value;
    t.nodes_[a].grad.array() += g.array() * (v.array() > 0.0).cast<double>();
  });
}

NodeId Tape::gin_combine(NodeId h, NodeId agg, NodeId eps) {
  check_same_shape("gin_combine", nodes_[h].value, nodes_[agg].value);
  check_scalar("gin_combine", nodes_[eps].value);
  const double e = nodes_[eps].value(0, 0);
  const bool rg = nodes_[h].requires_grad || nodes_[agg].requires_grad || nodes_[eps].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push((1.0 + e) * nodes_[h].value + nodes_[agg].value, rg, [h, agg, eps, e, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    if (t.nodes_[h].requires_grad) t.nodes_[h].grad += (1.0 + e) * g;
    if (t.nodes_[agg].requires_grad) t.nodes_[agg].grad += g;
    if (t.nodes_[eps].requires_grad) {
      t.nodes_[eps].grad(0, 0) += (g.array() * t.nodes_[h].value.array()).sum();
    }
  });
}

NodeId Tape::sum_rows(NodeId a) {
  const NodeId out = static_cast<NodeId>(nodes_.size());
  Eigen::MatrixXd v = nodes_[a].value.colwise().sum();
  return push(std::move(v), nodes_[a].requires_grad, [a, out](Tape& t) {
    if (!t.nodes_[a].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;  // 1 x cols
    t.nodes_[a].grad.rowwise() += g.row(0);
  });
}

NodeId Tape::vstack(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: empty part list");
  Eigen::Index rows = 0;
  const Eigen::Index cols = nodes_[parts.front()].value.cols();
  bool rg = false;
  for (NodeId id : parts) {
    if (nodes_[id].value.cols() != cols) throw std::invalid_argument("vstack: column count mismatch");
    rows += nodes_[id].value.rows();
    rg = rg || nodes_[id].requires_grad;
  }
  Eigen::MatrixXd v(rows, cols);
  Eigen::Index at = 0;
  for (NodeId id : parts) {
    v.middleRows(at, nodes_[id].value.rows()) = nodes_[id].value;
    at += nodes_[id].value.rows();
  }
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(std::move(v), rg, [parts, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    Eigen::Index at2 = 0;
    for (NodeId id : parts) {
      const Eigen::Index r = t.nodes_[id].value.rows();
      if (t.nodes_[id].requires_grad) t.nodes_[id].grad += g.middleRows(at2, r);
      at2 += r;
    }
  });
}

NodeId Tape::normalize_rows(NodeId a, double min_norm) {
  const Eigen::MatrixXd& v = nodes_[a].value;
  Eigen::VectorXd norms(v.rows());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    norms(i) = v.row(i).norm();
    if (!(norms(i) >= min_norm)) {
      throw std::runtime_error("normalize_rows: degenerate embedding (row " + std::to_string(i) +
                               " norm " + std::to_string(norms(i)) + " < " + std::to_string(min_norm) + ")");
    }
  }
  Eigen::MatrixXd y = norms.cwiseInverse().asDiagonal() * v;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(std::move(y), nodes_[a].requires_grad, [a, out, norms](Tape& t) {
    if (!t.nodes_[a].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    const Eigen::MatrixXd& y2 = t.nodes_[out].value;
    // d z = (g - (g . y) y) / ||z||  per row (quotient rule)
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double dot = g.row(i).dot(y2.row(i));
      t.nodes_[a].grad.row(i) += (g.row(i) - dot * y2.row(i)) / norms(i);
    }
  });
}

NodeId Tape::gram(NodeId z) {
  const auto& v = nodes_[z].value;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(v * v.transpose(), nodes_[z].requires_grad, [z, out](Tape& t) {
    if (!t.nodes_[z].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    t.nodes_[z].grad.noalias() += (g + g.transpose()) * t.nodes_[z].value;
  });
}

NodeId Tape::info_nce_from_gram(NodeId g, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("info_nce_from_gram: tau must be > 0");
  const Eigen::MatrixXd& s = nodes_[g].value;
  const Eigen::Index two_n = s.rows();
  if (s.cols() != two_n || two_n % 2 != 0 || two_n < 2) {
    throw std::invalid_argument("info_nce_from_gram: expected even square gram matrix");
  }
  const Eigen::Index n = two_n / 2;

  // l_r = -s(r, p_r)/tau + log sum_{c != r} exp(s(r, c)/tau); positive stays
  // in the denominator, only the anchor's self column is excluded.
  double total = 0.0;
  Eigen::MatrixXd softmax(two_n, two_n);  // rowwise softmax over c != r, zero at c = r
  for (Eigen::Index r = 0; r < two_n; ++r) {
    const Eigen::Index p = r < n ? r + n : r - n;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < two_n; ++c) {
      if (c != r) mx = std::max(mx, s(r, c) / tau);
    }
    double denom = 0.0;
    for (Eigen::Index c = 0; c < two_n; ++c) {
      denom += c == r ? 0.0 : std::exp(s(r, c) / tau - mx);
    }
    const double lse = mx + std::log(denom);
    total += -s(r, p) / tau + lse;
    for (Eigen::Index c = 0; c < two_n; ++c) {
      softmax(r, c) = c == r ? 0.0 : std::exp(s(r, c) / tau - mx) / denom;
    }
  }

  Eigen::MatrixXd value(1, 1);
  value(0, 0) = total;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(std::move(value), nodes_[g].requires_grad,
              [g, out, softmax = std::move(softmax), tau, n](Tape& t) {
                if (!t.nodes_[g].requires_grad) return;
                const double gout = t.nodes_[out].grad(0, 0);
                Eigen::MatrixXd& dg = t.nodes_[g].grad;
                const Eigen::Index two_n2 = dg.rows();
                for (Eigen::Index r = 0; r < two_n2; ++r) {
                  const Eigen::Index p = r < n ? r + n : r - n;
                  for (Eigen::Index c = 0; c < two_n2; ++c) {
                    if (c == r) continue;
                    double d = softmax(r, c) / tau;
                    if (c == p) d -= 1.0 / tau;
                    dg(r, c) += gout * d;
                  }
                }
              });
}

NodeId Tape::masked_clamp(NodeId s, const Eigen::MatrixXd& mask) {
  check_same_shape("masked_clamp", nodes_[s].value, mask);
  const Eigen::MatrixXd v = nodes_[s].value.cwiseMax(0.0).cwiseProduct(mask);
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(v, nodes_[s].requires_grad, [s, out, mask](Tape& t) {
    if (!t.nodes_[s].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    const Eigen::MatrixXd& sv = t.nodes_[s].value;
    t.nodes_[s].grad.array() += g.array() * mask.array() * (sv.array() > 0.0).cast<double>();
  });
}

NodeId Tape::row_sums(NodeId w) {
  const NodeId out = static_cast<NodeId>(nodes_.size());
  Eigen::MatrixXd v = nodes_[w].value.rowwise().sum();
  return push(std::move(v), nodes_[w].requires_grad, [w, out](Tape& t) {
    if (!t.nodes_[w].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;  // n x 1
    t.nodes_[w].grad.colwise() += g.col(0);
  });
}

NodeId Tape::rsqrt_or_zero(NodeId d, double tol) {
  const Eigen::MatrixXd& v = nodes_[d].value;
  if (v.cols() != 1) throw std::invalid_argument("rsqrt_or_zero: expected column vector");
  Eigen::MatrixXd y(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) y(i, 0) = v(i, 0) > tol ? 1.0 / std::sqrt(v(i, 0)) : 0.0;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(std::move(y), nodes_[d].requires_grad, [d, out, tol](Tape& t) {
    if (!t.nodes_[d].requires_grad) return;
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    const Eigen::MatrixXd& v2 = t.nodes_[d].value;
    for (Eigen::Index i = 0; i < v2.rows(); ++i) {
      if (v2(i, 0) > tol) {
        t.nodes_[d].grad(i, 0) += g(i, 0) * (-0.5 * std::pow(v2(i, 0), -1.5));
      }
    }
  });
}

NodeId Tape::sym_scale(NodeId w, NodeId s) {
  const Eigen::MatrixXd& vw = nodes_[w].value;
  const Eigen::MatrixXd& vs = nodes_[s].value;
  if (vs.cols() != 1 || vs.rows() != vw.rows() || vw.rows() != vw.cols()) {
    throw std::invalid_argument("sym_scale: expected square matrix and matching column vector");
  }
  const Eigen::VectorXd sv = vs.col(0);
  Eigen::MatrixXd y = sv.asDiagonal() * vw * sv.asDiagonal();
  const bool rg = nodes_[w].requires_grad || nodes_[s].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(std::move(y), rg, [w, s, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    const Eigen::MatrixXd& vw2 = t.nodes_[w].value;
    const Eigen::VectorXd sv2 = t.nodes_[s].value.col(0);
    if (t.nodes_[w].requires_grad) {
      t.nodes_[w].grad += sv2.asDiagonal() * g * sv2.asDiagonal();
    }
    if (t.nodes_[s].requires_grad) {
      // M_ij = s_i W_ij s_j: ds_i = sum_j g_ij W_ij s_j + sum_j g_ji W_ji s_j
      const Eigen::VectorXd row_part = (g.cwiseProduct(vw2) * sv2);
      const Eigen::VectorXd col_part = (g.cwiseProduct(vw2)).transpose() * sv2;
      t.nodes_[s].grad.col(0) += row_part + col_part;
    }
  });
}

NodeId Tape::fro_sq_diff(NodeId a, NodeId b) {
  check_same_shape("fro_sq_diff", nodes_[a].value, nodes_[b].value);
  Eigen::MatrixXd value(1, 1);
  value(0, 0) = (nodes_[a].value - nodes_[b].value).squaredNorm();
  const bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(std::move(value), rg, [a, b, out](Tape& t) {
    const double g = t.nodes_[out].grad(0, 0);
    const Eigen::MatrixXd diff = t.nodes_[a].value - t.nodes_[b].value;
    if (t.nodes_[a].requires_grad) t.nodes_[a].grad += 2.0 * g * diff;
    if (t.nodes_[b].requires_grad) t.nodes_[b].grad -= 2.0 * g * diff;
  });
}

NodeId Tape::axpy(double alpha, NodeId x, NodeId y) {
  check_same_shape("axpy", nodes_[x].value, nodes_[y].value);
  const bool rg = nodes_[x].requires_grad || nodes_[y].requires_grad;
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(alpha * nodes_[x].value + nodes_[y].value, rg, [alpha, x, y, out](Tape& t) {
    const Eigen::MatrixXd& g = t.nodes_[out].grad;
    if (t.nodes_[x].requires_grad) t.nodes_[x].grad += alpha * g;
    if (t.nodes_[y].requires_grad) t.nodes_[y].grad += g;
  });
}

NodeId Tape::scale(NodeId a, double c) {
  const NodeId out = static_cast<NodeId>(nodes_.size());
  return push(c * nodes_[a].value, nodes_[a].requires_grad, [a, c, out](Tape& t) {
    if (t.nodes_[a].requires_grad) t.nodes_[a].grad += c * t.nodes_[out].grad;
  });
}

void Tape::backward(NodeId loss) {
  check_scalar("backward", nodes_[loss].value);
  for (auto& node : nodes_) node.grad.setZero();
  nodes_[loss].grad(0, 0) = 1.0;
  // Strict reverse creation order fixes the accumulation order.
  for (NodeId id = loss; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.pull) continue;
    node.pull(*this);
  }
}

}  // namespace specmatch
