#pragma once

#include <Eigen/Dense>

namespace specmatch {

// Full symmetric eigendecomposition, eigenvalues ascending, eigenvectors in
// matching columns. Cyclic Jacobi iterated until the off-diagonal Frobenius
// norm falls below 1e-12. Input must satisfy ||M - M^T||_inf <= 1e-9.
struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

EigenDecomposition eigh(const Eigen::MatrixXd& m);

// P = exp(-t_d * L) via the eigendecomposition. Requires t_d > 0.
Eigen::MatrixXd heat_kernel(const Eigen::MatrixXd& lap, double t_d);

// Smallest eigenvalue strictly above zero_tol. Throws std::runtime_error
// ("no spectral gap") when every eigenvalue is within tolerance of zero.
double lambda2(const Eigen::MatrixXd& lap, double zero_tol = 1e-8);

// Second entry of the ascending spectrum. This is the right surrogate for
// "smallest non-zero eigenvalue" on an ensemble-mean Laplacian, whose
// smallest eigenvalue is typically a small positive number rather than an
// exact zero; sorted-position pairing is also what Hoffman-Wielandt needs.
double second_smallest_eigenvalue(const Eigen::MatrixXd& m);

// Number of eigenvalues <= zero_tol; > 1 means a disconnected graph.
int zero_eigenvalue_multiplicity(const Eigen::MatrixXd& lap, double zero_tol = 1e-8);

struct DegreeWeightedMean {
  Eigen::VectorXd mean;  // mu = sum_i d_i z_i / sum_k d_k
  double norm_sq = 0.0;  // ||mu||^2
};

// Requires sum of degrees > 0 (throws std::runtime_error otherwise).
DegreeWeightedMean degree_weighted_mean(const Eigen::MatrixXd& z, const Eigen::VectorXd& degrees);

// Displacement ratio c_hat = sum_i ||z1_i - z2_i||^2 / ||P1 - P2||_F^2.
// Throws std::runtime_error when the denominator is <= 1e-12 (degenerate).
double estimate_c(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                  const Eigen::MatrixXd& p1, const Eigen::MatrixXd& p2);

// Per-view spectral digest used by the verification harness.
struct SpectralSummary {
  Eigen::MatrixXd heat;      // exp(-t_d L)
  double lambda2 = 0.0;      // valid iff has_gap
  bool has_gap = false;
  Eigen::VectorXd mu;
  double mu_norm_sq = 0.0;
  double c_hat = 0.0;        // valid iff !degenerate; pair-level, same on both views
  bool degenerate = true;
};

SpectralSummary summarize_spectral(const Eigen::MatrixXd& z, const Eigen::VectorXd& degrees,
                                   const Eigen::MatrixXd& lap, double t_d,
                                   double zero_tol = 1e-8);

// Fills c_hat / degenerate on both summaries from the pair displacement ratio.
void attach_displacement_ratio(SpectralSummary& a, SpectralSummary& b,
                               const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2);

}  // namespace specmatch
