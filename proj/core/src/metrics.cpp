#include "specmatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

namespace specmatch {

double alignment_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double alpha) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw std::invalid_argument("alignment_loss: view shape mismatch");
  }
  if (z1.rows() < 1) throw std::invalid_argument("alignment_loss: empty batch");
  if (!(alpha > 0.0)) throw std::invalid_argument("alignment_loss: alpha must be > 0");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z1.rows(); ++i) {
    total += std::pow((z1.row(i) - z2.row(i)).norm(), alpha);
  }
  return total / static_cast<double>(z1.rows());
}

double uniformity_loss(const Eigen::MatrixXd& z, double t) {
  if (z.rows() < 2) throw std::invalid_argument("uniformity_loss: need at least 2 rows");
  if (!(t > 0.0)) throw std::invalid_argument("uniformity_loss: t must be > 0");
  const Eigen::Index n = z.rows();
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> exponents;
  exponents.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double e = -t * (z.row(i) - z.row(j)).squaredNorm();
      exponents.push_back(e);
      mx = std::max(mx, e);
    }
  }
  double acc = 0.0;
  for (double e : exponents) acc += std::exp(e - mx);
  // Mean over ordered distinct pairs equals mean over unordered pairs.
  return mx + std::log(acc / static_cast<double>(exponents.size()));
}

double uniformity_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double t) {
  if (z1.cols() != z2.cols()) throw std::invalid_argument("uniformity_loss: dim mismatch");
  Eigen::MatrixXd pooled(z1.rows() + z2.rows(), z1.cols());
  pooled.topRows(z1.rows()) = z1;
  pooled.bottomRows(z2.rows()) = z2;
  return uniformity_loss(pooled, t);
}

double linear_probe(const Eigen::MatrixXd& train_z, const std::vector<int>& train_y,
                    const Eigen::MatrixXd& test_z, const std::vector<int>& test_y,
                    int steps, double lr, double l2) {
  if (train_z.rows() != static_cast<Eigen::Index>(train_y.size())) {
    throw std::invalid_argument("linear_probe: train size mismatch");
  }
  if (test_z.rows() != static_cast<Eigen::Index>(test_y.size())) {
    throw std::invalid_argument("linear_probe: test size mismatch");
  }
  if (train_z.rows() < 1 || test_z.rows() < 1) {
    throw std::invalid_argument("linear_probe: empty split");
  }
  if (train_z.cols() != test_z.cols()) throw std::invalid_argument("linear_probe: dim mismatch");
  if (steps < 1 || !(lr > 0.0) || !(l2 >= 0.0)) {
    throw std::invalid_argument("linear_probe: bad optimizer settings");
  }

  // Map labels to contiguous ids over the union of both splits so unseen test
  // labels score as wrong instead of crashing.
  std::set<int> label_set(train_y.begin(), train_y.end());
  label_set.insert(test_y.begin(), test_y.end());
  std::vector<int> labels(label_set.begin(), label_set.end());
  auto label_id = [&](int y) {
    return static_cast<Eigen::Index>(
        std::lower_bound(labels.begin(), labels.end(), y) - labels.begin());
  };
  const Eigen::Index k = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index d = train_z.cols();
  const Eigen::Index n = train_z.rows();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, label_id(train_y[static_cast<std::size_t>(i)])) = 1.0;

  for (int step = 0; step < steps; ++step) {
    Eigen::MatrixXd logits = (train_z * w).rowwise() + b.transpose();
    Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    Eigen::MatrixXd shifted = (logits.colwise() - row_max).array().exp();
    Eigen::VectorXd sums = shifted.rowwise().sum();
    Eigen::MatrixXd probs = shifted.array().colwise() / sums.array();
    Eigen::MatrixXd delta = (probs - onehot) / static_cast<double>(n);
    Eigen::MatrixXd grad_w = train_z.transpose() * delta + l2 * w;
    Eigen::VectorXd grad_b = delta.colwise().sum();
    w -= lr * grad_w;
    b -= lr * grad_b;
  }

  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test_z.rows(); ++i) {
    Eigen::VectorXd logits = w.transpose() * test_z.row(i).transpose() + b;
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    if (labels[static_cast<std::size_t>(best)] == test_y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_z.rows());
}

}  // namespace specmatch
