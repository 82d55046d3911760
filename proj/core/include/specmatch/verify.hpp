#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "specmatch/augment.hpp"
#include "specmatch/encoder.hpp"
#include "specmatch/graph.hpp"
#include "specmatch/loss.hpp"

namespace specmatch {

// One checked inequality, oriented so the mathematical claim is lhs <= rhs.
// passed <=> slack = rhs - lhs >= -tolerance. status is "ok" or "skipped"
// (degenerate inputs make the claim vacuous, never a failure).
struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string status = "ok";
  std::string note;
  std::vector<std::pair<std::string, double>> context;
};

BoundReport make_report(const std::string& name, double lhs, double rhs, double tolerance,
                        std::vector<std::pair<std::string, double>> context = {},
                        const std::string& note = "");

// ||exp(-t_d L1) - exp(-t_d L2)||_F <= t_d ||L1 - L2||_F for PSD L1, L2.
BoundReport verify_duhamel(const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2, double t_d);

// For unit-row z1, z2: ||z1_i - z2_i||^2 = 2 - 2 <z1_i, z2_i> row by row.
// Reported as max row deviation <= 0 with tolerance 1e-12.
BoundReport verify_cosine_identity(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2);

// |L_C - L_C*| <= (t_d^2 c_hat / tau) * L_G on binary-mode view graphs,
// where L_C* is the contrastive loss with every positive-pair similarity
// replaced by 1 (negatives unchanged) and c_hat is the displacement ratio.
// Returns a skipped report when the heat kernels coincide.
BoundReport verify_contrastive_shift(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                                     const LossConfig& config, double t_d);

// (lambda2(L) - lambda2_bar(L_bar))^2 <= ||L - L_bar||_F^2 with sorted
// second-eigenvalue pairing on the mean side.
BoundReport verify_hoffman_wielandt(const Eigen::MatrixXd& lap, const Eigen::MatrixXd& lap_mean,
                                    double zero_tol = 1e-8);

// lambda2 * (1 - ||mu||^2) <= (1/2) sum_ij (A_ij / sum_k d_k) ||z_i - z_j||^2
// for unit-row z on a graph whose Laplacian has a simple zero eigenvalue.
BoundReport verify_rayleigh_step(const ViewGraph& vg, const Eigen::MatrixXd& z,
                                 double zero_tol = 1e-8);

// exp(-t x) <= 1 - ((1 - exp(-4t)) / 4) x on [0, 4] (chord from x=0 to x=4).
BoundReport verify_chord_bound(double t, int grid_points = 41);

// Central-difference check that the per-anchor loss, as a function of its
// positive similarity with negatives fixed, has |dl/ds| <= 1/tau on [-1, 1].
BoundReport verify_lipschitz(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                             double tau, int grid_points = 41);
// Companion monotonicity check: dl/ds <= 0 everywhere on the grid.
BoundReport verify_lipschitz_monotone(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2,
                                      double tau, int grid_points = 41);

// Monte-Carlo ensemble of single-view augmentation draws pushed through a
// frozen encoder into binary-mode view graphs. Draws whose Laplacian lacks a
// simple zero eigenvalue (disconnected graph-of-graphs) are discarded for
// the concentration checks; fewer than 2 usable draws is an error.
struct EnsembleStats {
  int n_draws = 0;      // requested
  int n_connected = 0;  // kept
  double discard_rate = 0.0;

  Eigen::MatrixXd lap_mean;      // mean over connected draws
  double pairwise_loss_g = 0.0;  // mean ||L_m - L_m'||_F^2 over unordered draw pairs
  double centered_loss_g = 0.0;  // 2 * mean_m ||L_m - lap_mean||_F^2 (cross-check route)
  double lambda2_bar = 0.0;      // second-smallest eigenvalue of lap_mean

  std::vector<double> lambda2_draws;
  double mean_lambda2 = 0.0;
  double var_lambda2 = 0.0;  // population (1/M) variance

  std::vector<double> mu_norm_sq_draws;
  double mean_mu_norm_sq = 0.0;

  std::vector<double> uniformity_draws;
  double mean_uniformity = 0.0;

  std::vector<Eigen::MatrixXd> laps;     // connected draws
  std::vector<Eigen::MatrixXd> zs;       // normalized embeddings per connected draw
  std::vector<ViewGraph> view_graphs;    // per connected draw
};

EnsembleStats build_ensemble(const std::vector<Graph>& batch, const AugmentPolicy& policy,
                             const EncoderParams& encoder, int m_draws,
                             const LossConfig& config, double unif_t, std::uint64_t seed);

// Ensemble-mean uniformity against the spectral-gap bound
//   mean unif <= ((1-e^{-4t})/(2 sqrt 2)) (3/2 - E||mu||^2) sqrt(E L_G)
//               - ((1-e^{-4t})/2) lambda2_bar (1 - E||mu||^2)
// with tolerance 1e-6 plus a 3-standard-error Monte-Carlo slack.
BoundReport verify_uniformity_bound(const EnsembleStats& stats, double t);

// Var[lambda2] <= (1/2) E[L_G] + 3 standard errors.
BoundReport verify_lambda2_variance(const EnsembleStats& stats);

// Pairwise estimator vs centered route: the mean of ||L_m - L_m'||_F^2 over
// unordered draw pairs equals (M/(M-1)) * 2 mean_m ||L_m - L_bar||_F^2
// exactly; checked to floating-point tolerance.
BoundReport verify_pairwise_identity(const EnsembleStats& stats);

struct HarnessConfig {
  std::uint64_t seed = 1;
  double t_d = 1.0;
  double unif_t = 2.0;
  double percentile = 80.0;
  std::vector<double> taus = {0.2, 0.5, 1.0};
  std::vector<double> duhamel_t_ds = {0.5, 1.0, 2.0};
  int duhamel_pairs = 200;
  int duhamel_n = 16;
  int shift_batches = 100;
  int shift_n = 32;
  int embed_dim = 8;
  int ensemble_checks = 8;     // ensembles for the concentration suite
  int uniformity_checks = 50;  // ensembles for the uniformity bound
  int m_draws = 64;
  int batch_n = 32;
  SbmParams sbm;
  EncoderConfig encoder;
  AugmentPolicy policy;

  HarnessConfig();
};

// Elementary inequality checks on synthetic batches: chord, Duhamel,
// Lipschitz/monotonicity, contrastive shift. Aggregated worst-case reports.
std::vector<BoundReport> run_inequality_suite(const HarnessConfig& config);

// Ensemble concentration checks: Hoffman-Wielandt, Rayleigh step,
// lambda2-variance bound, pairwise identity.
std::vector<BoundReport> run_ensemble_suite(const HarnessConfig& config);

// Ensemble uniformity bound checks.
std::vector<BoundReport> run_uniformity_suite(const HarnessConfig& config);

std::vector<BoundReport> run_default_harness(const HarnessConfig& config);

bool all_passed(const std::vector<BoundReport>& reports);
std::string reports_to_json(const std::vector<BoundReport>& reports);
void save_reports(const std::vector<BoundReport>& reports, const std::string& path);
void print_reports(std::ostream& os, const std::vector<BoundReport>& reports);

}  // namespace specmatch
