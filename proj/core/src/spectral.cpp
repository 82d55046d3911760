#include "specmatch/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace specmatch {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kOffDiagTarget = 1e-12;
constexpr int kMaxSweeps = 100;

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (i != j) sum += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(sum);
}

}  // namespace

EigenDecomposition eigh(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("eigh: matrix must be square, got " + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()));
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTol)) {
    throw std::invalid_argument("eigh: matrix not symmetric, max |M - M^T| = " + std::to_string(asym));
  }

  const Eigen::Index n = m.rows();
  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  // Cyclic Jacobi: sweep all (p, q) pairs, rotating each pivot to zero,
  // until the off-diagonal Frobenius norm is at target.
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(a) > kOffDiagTarget; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

Eigen::MatrixXd heat_kernel(const Eigen::MatrixXd& lap, double t_d) {
  if (!(t_d > 0.0)) throw std::invalid_argument("heat_kernel: t_d must be > 0, got " + std::to_string(t_d));
  const EigenDecomposition eig = eigh(lap);
  const Eigen::VectorXd damp = (-t_d * eig.eigenvalues.array()).exp();
  Eigen::MatrixXd p = eig.eigenvectors * damp.asDiagonal() * eig.eigenvectors.transpose();
  return 0.5 * (p + p.transpose().eval());  // kill asymmetric rounding
}

double lambda2(const Eigen::MatrixXd& lap, double zero_tol) {
  const EigenDecomposition eig = eigh(lap);
  for (Eigen::Index k = 0; k < eig.eigenvalues.size(); ++k) {
    if (eig.eigenvalues(k) > zero_tol) return eig.eigenvalues(k);
  }
  throw std::runtime_error("lambda2: no spectral gap (all eigenvalues <= " +
                           std::to_string(zero_tol) + ")");
}

double second_smallest_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() < 2) throw std::invalid_argument("second_smallest_eigenvalue: need at least 2x2");
  return eigh(m).eigenvalues(1);
}

int zero_eigenvalue_multiplicity(const Eigen::MatrixXd& lap, double zero_tol) {
  const EigenDecomposition eig = eigh(lap);
  int count = 0;
  for (Eigen::Index k = 0; k < eig.eigenvalues.size(); ++k) {
    if (std::abs(eig.eigenvalues(k)) <= zero_tol) ++count;
  }
  return count;
}

DegreeWeightedMean degree_weighted_mean(const Eigen::MatrixXd& z, const Eigen::VectorXd& degrees) {
  if (z.rows() != degrees.size()) {
    throw std::invalid_argument("degree_weighted_mean: embedding rows (" + std::to_string(z.rows()) +
                                ") != degree entries (" + std::to_string(degrees.size()) + ")");
  }
  const double total = degrees.sum();
  if (!(total > 0.0)) throw std::runtime_error("degree_weighted_mean: degenerate graph (total degree 0)");
  DegreeWeightedMean out;
  out.mean = (z.transpose() * degrees) / total;
  out.norm_sq = out.mean.squaredNorm();
  return out;
}

double estimate_c(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                  const Eigen::MatrixXd& p1, const Eigen::MatrixXd& p2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw std::invalid_argument("estimate_c: embedding shape mismatch");
  }
  const double denom = (p1 - p2).squaredNorm();
  if (!(denom > 1e-12)) {
    throw std::runtime_error("estimate_c: degenerate heat-kernel pair (||P1 - P2||_F^2 <= 1e-12)");
  }
  return (z1 - z2).squaredNorm() / denom;
}

SpectralSummary summarize_spectral(const Eigen::MatrixXd& z, const Eigen::VectorXd& degrees,
                                   const Eigen::MatrixXd& lap, double t_d, double zero_tol) {
  SpectralSummary out;
  out.heat = heat_kernel(lap, t_d);
  try {
    out.lambda2 = lambda2(lap, zero_tol);
    out.has_gap = true;
  } catch (const std::runtime_error&) {
    out.has_gap = false;
  }
  const DegreeWeightedMean mu = degree_weighted_mean(z, degrees);
  out.mu = mu.mean;
  out.mu_norm_sq = mu.norm_sq;
  return out;
}

void attach_displacement_ratio(SpectralSummary& a, SpectralSummary& b,
                               const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2) {
  try {
    const double c = estimate_c(z1, z2, a.heat, b.heat);
    a.c_hat = b.c_hat = c;
    a.degenerate = b.degenerate = false;
  } catch (const std::runtime_error&) {
    a.c_hat = b.c_hat = 0.0;
    a.degenerate = b.degenerate = true;
  }
}

}  // namespace specmatch
