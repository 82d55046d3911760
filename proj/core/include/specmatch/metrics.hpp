#pragma once

#include <Eigen/Dense>
#include <vector>

namespace specmatch {

struct MetricConfig {
  double align_alpha = 2.0;  // alignment exponent
  double unif_t = 2.0;       // uniformity kernel sharpness
};

// mean_i ||z1_i - z2_i||^alpha over paired rows.
double alignment_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double alpha = 2.0);

// log mean_{i<j} exp(-t ||z_i - z_j||^2) over unordered distinct pairs
// (self pairs excluded). Requires at least two rows.
double uniformity_loss(const Eigen::MatrixXd& z, double t = 2.0);

// Pooled variant: both views stacked into one sample.
double uniformity_loss(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2, double t = 2.0);

// Multinomial logistic regression probe: full-batch gradient descent,
// zero-initialized weights, L2 penalty on weights (not bias). Returns test
// accuracy. Deterministic.
double linear_probe(const Eigen::MatrixXd& train_z, const std::vector<int>& train_y,
                    const Eigen::MatrixXd& test_z, const std::vector<int>& test_y,
                    int steps = 500, double lr = 0.1, double l2 = 1e-4);

}  // namespace specmatch
