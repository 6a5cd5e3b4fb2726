#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "etaknn/core.hpp"

namespace etaknn {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Composite periodic kernel settings and the hyperparameter search budget.
struct GpConfig {
  double period1 = 95.0;  // steps
  double period2 = 95.0;  // steps
  Range l1_range{100.0, 1000.0};
  Range l2_range{0.5, 1.0};
  Range noise_range{0.001, 1.0};
  std::size_t window_len = 480;
  std::size_t window_overlap = 96;
  // Grid points per axis of the log-spaced coarse search.
  int grid_points = 8;
  // Upper bound on marginal-likelihood evaluations (grid + refinement).
  int max_opt_evals = 640;
  // Divides window-relative step indices in the dot-product factor.
  double trend_scale = 480.0;
  // Standardize window observations before fitting (zero-mean prior on the
  // standardized series).
  bool normalize_y = true;
  std::size_t min_observations = 8;
  // Worker threads across counters; 0 picks the hardware concurrency.
  int threads = 0;

  /// Throws Error(parameter) on empty/non-positive ranges or bad windows.
  void validate() const;
};

/// exp(-2 l^-2 sin^2(pi |xi - xj| / P)). Throws Error(parameter) when P or l
/// is not positive.
double periodic_kernel(double xi, double xj, double period, double length);

/// periodic(P1, l1) * (xi * xj) + periodic(P2, l2), with xi and xj divided by
/// cfg.trend_scale inside the dot product.
double composite_kernel(double xi, double xj, const GpConfig& cfg, double l1,
                        double l2);

enum class KernelKind { composite, periodic };

struct KernelParams {
  KernelKind kind = KernelKind::composite;
  double period1 = 95.0;
  double l1 = 100.0;
  double period2 = 95.0;
  double l2 = 1.0;
  double trend_scale = 1.0;
  double noise = 0.001;  // white noise added to the Gram diagonal

  /// Covariance between two inputs, without the white-noise term. The
  /// periodic kind uses (period2, l2) only.
  double operator()(double xi, double xj) const;
};

struct FittedGp {
  KernelParams params;
  std::vector<double> x;
  std::vector<double> y;  // as given, before normalization
  double y_offset = 0.0;
  double y_scale = 1.0;
  double noise_used = 0.0;  // diagonal term after jitter escalation
  double log_likelihood = 0.0;
  Eigen::MatrixXd chol;     // lower Cholesky factor of Sigma
  Eigen::VectorXd alpha;    // Sigma^-1 (y - offset) / scale
};

struct GpPosterior {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Conditions a zero-mean GP with fixed hyperparameters on (x, y). When
/// `normalize` is set, y is standardized first and the posterior is mapped
/// back. The diagonal noise is escalated (x10, x100) if the factorization
/// fails; after that, Error(fit).
FittedGp gp_condition(std::span<const double> x, std::span<const double> y,
                      const KernelParams& params, bool normalize);

/// Log marginal likelihood of y (used as given) by dense Cholesky; -inf when
/// the factorization fails.
double gp_log_marginal(std::span<const double> x, std::span<const double> y,
                       const KernelParams& params);

/// The same quantity through a truncated harmonic expansion of both periodic
/// factors and the Woodbury identity, as used by the hyperparameter search.
/// nullopt when the configured length-scale ranges need too many harmonics
/// or the window is too short for the low-rank form to pay off.
std::optional<double> gp_log_marginal_spectral(std::span<const double> x,
                                               std::span<const double> y,
                                               const KernelParams& params,
                                               const GpConfig& cfg);

/// Maximizes the log marginal likelihood over (l1, l2, noise) within the
/// configured ranges, periods held fixed. Requires cfg.min_observations
/// points.
FittedGp gp_fit_window(std::span<const double> x, std::span<const double> y,
                       const GpConfig& cfg);

GpPosterior gp_posterior(const FittedGp& model,
                         std::span<const double> x_star);

struct WindowFit {
  NodeId counter = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t n_observed = 0;
  bool fitted = false;
  double l1 = 0.0;
  double l2 = 0.0;
  double noise = 0.0;
  double log_likelihood = 0.0;
  std::string note;
};

struct ImputeReport {
  std::vector<WindowFit> windows;
  std::vector<std::string> warnings;
  std::size_t cells_imputed = 0;
};

/// Window boundaries [start, end) covering [0, total).
std::vector<std::pair<std::size_t, std::size_t>> impute_windows(
    std::size_t total, std::size_t window_len, std::size_t overlap);

/// Fills missing cells per counter with the GP posterior mean (clamped at 0).
/// Observed cells are never modified; filled cells are marked imputed.
FlowPanel impute_panel(const FlowPanel& flows, const GpConfig& cfg,
                       ImputeReport* report = nullptr);

/// Imputes only steps [0, n_steps), leaving later steps as they are.
FlowPanel impute_prefix(const FlowPanel& flows, std::size_t n_steps,
                        const GpConfig& cfg, ImputeReport* report = nullptr);

}  // namespace etaknn
