#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "ventrl/cohort.hpp"
#include "ventrl/common.hpp"
#include "ventrl/signals.hpp"

namespace ventrl::gp {

/// Spectral basis kernel kappa(tau) = exp(-2 pi^2 tau^2 v) cos(2 pi tau mu).
/// Frequencies are in cycles per minute.
struct SpectralBasisParams {
  double bandwidth = 1e-3;  // v >= 0
  double frequency = 0.0;   // mu
};

double basis_kernel(double tau_min, const SpectralBasisParams& p);

/// Multi-output GP over the continuous vitals of one admission. The joint
/// kernel between (signal d, time t) and (signal d', time t') is
///   sum_q B_q[d,d'] * kappa_q(|t - t'|)
/// with B_q = A_q A_q^T + diag(d_q) kept positive semidefinite by
/// construction. Observations are stored in model space; `offset`/`scale`
/// map predictions back to raw units (identity unless set by fitting).
struct GPModel {
  static constexpr int kRank = 5;  // width of the low-rank scale factor

  int n_signals = static_cast<int>(kNumContinuousSignals);
  std::vector<Eigen::MatrixXd> scale_factors;  // Q matrices, D x kRank
  std::vector<Eigen::VectorXd> scale_diags;    // Q vectors, D, nonnegative
  std::vector<SpectralBasisParams> basis;      // Q
  Eigen::VectorXd noise_var;                   // D, > 0

  std::vector<std::vector<double>> obs_times;   // per signal
  std::vector<std::vector<double>> obs_values;  // model space

  Eigen::VectorXd offset;  // raw = offset + scale * model prediction
  Eigen::VectorXd scale;

  int n_mixtures() const { return static_cast<int>(basis.size()); }
  std::size_t n_observations() const;
  Eigen::MatrixXd scale_matrix(int q) const;  // B_q

  /// Zero-mean prior with B_q near identity; the documented fixed init.
  static GPModel make_init(int n_signals = static_cast<int>(kNumContinuousSignals),
                           int n_mixtures = 2);
};

/// Cross-signal covariance over explicit per-signal time lists, no noise.
/// Row/column blocks follow the order of `times_by_signal`.
Eigen::MatrixXd lmc_covariance(const GPModel& model,
                               const std::vector<std::vector<double>>& times_by_signal);

struct FitConfig {
  int max_iters = 200;        // accepted ascent steps
  std::size_t obs_cap = 2000; // episodes above this are evenly thinned
  double noise_floor = 1e-6;  // variance floor per signal
  int n_mixtures = 2;
  double init_step = 1e-2;
  double min_step = 1e-10;

  std::string canonical_string() const;  // for artifact fingerprints
};

/// Gaussian log marginal likelihood of the model's stored observations.
double log_marginal_likelihood(const GPModel& model);

/// The optimizer's view of the model: an unconstrained hyperparameter vector
/// (scale factors raw; diagonals, bandwidths and noise through log maps) and
/// the analytic likelihood gradient with respect to it. Exposed so the
/// gradient can be checked against finite differences.
Eigen::VectorXd pack_hyperparameters(const GPModel& model, double noise_floor = 0.0);
GPModel with_hyperparameters(const GPModel& model, const Eigen::VectorXd& theta,
                             double noise_floor = 0.0);
std::pair<double, Eigen::VectorXd> lml_with_gradient(const GPModel& model,
                                                     double noise_floor = 0.0);

/// Hyperparameter fit by monotone gradient ascent on the log marginal
/// likelihood; observations are standardized per signal first.
GPModel fit_gp(const cohort::PatientEpisode& episode, const GPModel& init,
               const FitConfig& config);
GPModel fit_gp(const cohort::PatientEpisode& episode, const FitConfig& config);

/// Posterior mean at the query times for every signal, in raw units;
/// rows follow signal order. With no observations this is the prior mean.
Eigen::MatrixXd posterior_mean(const GPModel& model,
                               const std::vector<double>& query_times);

/// Complete fixed-step series: 12 GP-imputed signals plus mean-binned,
/// sample-and-hold rass and vent_mode.
struct RegularSeries {
  double step_min = 10.0;
  std::size_t n_steps = 0;
  std::vector<double> data;  // kNumSignals rows * n_steps, row-major

  double time_at(std::size_t k) const { return static_cast<double>(k) * step_min; }
  double value(Signal s, std::size_t k) const {
    return data[static_cast<std::size_t>(s) * n_steps + k];
  }
  double& value_ref(Signal s, std::size_t k) {
    return data[static_cast<std::size_t>(s) * n_steps + k];
  }
};

struct ImputeConfig {
  FitConfig fit;
  double grid_step_min = 10.0;
};

RegularSeries impute_episode(const cohort::PatientEpisode& episode,
                             const ImputeConfig& config = {});

}  // namespace ventrl::gp
