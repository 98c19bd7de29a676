#include "ventrl/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ventrl::gp {

namespace {

constexpr double kTwoPiSq = 2.0 * M_PI * M_PI;
constexpr double kTwoPi = 2.0 * M_PI;

// Observations stacked signal-major: all of signal 0, then signal 1, ...
struct StackedObs {
  std::vector<int> signal;  // n
  Eigen::VectorXd time;     // n
  Eigen::VectorXd value;    // n (model space)

  Eigen::Index size() const { return time.size(); }
};

StackedObs stack_observations(const GPModel& model) {
  StackedObs out;
  std::size_t n = model.n_observations();
  out.signal.reserve(n);
  out.time.resize(static_cast<Eigen::Index>(n));
  out.value.resize(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (std::size_t d = 0; d < model.obs_times.size(); ++d) {
    for (std::size_t i = 0; i < model.obs_times[d].size(); ++i) {
      out.signal.push_back(static_cast<int>(d));
      out.time[k] = model.obs_times[d][i];
      out.value[k] = model.obs_values[d][i];
      ++k;
    }
  }
  return out;
}

Eigen::MatrixXd kernel_matrix(const GPModel& model, const StackedObs& obs) {
  const Eigen::Index n = obs.size();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  const int Q = model.n_mixtures();
  std::vector<Eigen::MatrixXd> B(Q);
  for (int q = 0; q < Q; ++q) B[q] = model.scale_matrix(q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double tau = obs.time[i] - obs.time[j];
      double v = 0.0;
      for (int q = 0; q < Q; ++q) {
        v += B[q](obs.signal[i], obs.signal[j]) * basis_kernel(tau, model.basis[q]);
      }
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

struct CholResult {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Jitter ladder 1e-8 .. 1e-4 (x10 steps) relative to the mean diagonal.
CholResult cholesky_with_jitter(const Eigen::MatrixXd& K, const std::string& who) {
  const double mean_diag = std::max(K.diagonal().mean(), 1e-300);
  CholResult res;
  res.llt.compute(K);
  if (res.llt.info() == Eigen::Success) return res;
  for (double rel = 1e-8; rel <= 1e-4 * 1.0001; rel *= 10.0) {
    const double jitter = rel * mean_diag;
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    res.llt.compute(Kj);
    if (res.llt.info() == Eigen::Success) {
      res.jitter = jitter;
      return res;
    }
  }
  throw NumericalError("covariance not positive definite after max jitter (" + who + ")");
}

Eigen::MatrixXd noisy_kernel_matrix(const GPModel& model, const StackedObs& obs) {
  Eigen::MatrixXd K = kernel_matrix(model, obs);
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    K(i, i) += model.noise_var[obs.signal[i]];
  }
  return K;
}

double lml_from_chol(const CholResult& chol, const Eigen::VectorXd& y,
                     Eigen::VectorXd* alpha_out = nullptr) {
  Eigen::VectorXd alpha = chol.llt.solve(y);
  double log_det = 0.0;
  const auto& L = chol.llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) log_det += std::log(L(i, i));
  const double lml = -0.5 * y.dot(alpha) - log_det -
                     0.5 * static_cast<double>(y.size()) * std::log(2.0 * M_PI);
  if (alpha_out) *alpha_out = std::move(alpha);
  return lml;
}

// --- hyperparameter packing -------------------------------------------------
//
// Unconstrained vector: per mixture q [A_q row-major (D*R), log d_q (D)],
// then per mixture [log v_q, mu_q], then log(sigma_d^2 - floor) (D).

struct ParamLayout {
  int D = 0;
  int Q = 0;
  double noise_floor = 0.0;

  int per_mixture() const { return D * GPModel::kRank + D; }
  int basis_offset() const { return Q * per_mixture(); }
  int noise_offset() const { return basis_offset() + 2 * Q; }
  int size() const { return noise_offset() + D; }
};

Eigen::VectorXd pack(const GPModel& m, const ParamLayout& lay) {
  Eigen::VectorXd th(lay.size());
  int at = 0;
  for (int q = 0; q < lay.Q; ++q) {
    for (int d = 0; d < lay.D; ++d) {
      for (int r = 0; r < GPModel::kRank; ++r) th[at++] = m.scale_factors[q](d, r);
    }
    for (int d = 0; d < lay.D; ++d) {
      th[at++] = std::log(std::max(m.scale_diags[q][d], 1e-12));
    }
  }
  for (int q = 0; q < lay.Q; ++q) {
    th[at++] = std::log(std::max(m.basis[q].bandwidth, 1e-12));
    th[at++] = m.basis[q].frequency;
  }
  for (int d = 0; d < lay.D; ++d) {
    th[at++] = std::log(std::max(m.noise_var[d] - lay.noise_floor, 1e-12));
  }
  return th;
}

void unpack(const Eigen::VectorXd& th, const ParamLayout& lay, GPModel& m) {
  int at = 0;
  for (int q = 0; q < lay.Q; ++q) {
    for (int d = 0; d < lay.D; ++d) {
      for (int r = 0; r < GPModel::kRank; ++r) m.scale_factors[q](d, r) = th[at++];
    }
    for (int d = 0; d < lay.D; ++d) m.scale_diags[q][d] = std::exp(th[at++]);
  }
  for (int q = 0; q < lay.Q; ++q) {
    m.basis[q].bandwidth = std::exp(th[at++]);
    m.basis[q].frequency = th[at++];
  }
  for (int d = 0; d < lay.D; ++d) {
    m.noise_var[d] = lay.noise_floor + std::exp(th[at++]);
  }
}

struct Objective {
  double lml = 0.0;
  Eigen::VectorXd grad;
};

double evaluate_lml(const GPModel& model, const StackedObs& obs) {
  if (obs.size() == 0) return 0.0;
  Eigen::MatrixXd K = noisy_kernel_matrix(model, obs);
  CholResult chol = cholesky_with_jitter(K, "lml");
  return lml_from_chol(chol, obs.value);
}

// dLML/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta), fused per mixture.
Objective evaluate_with_grad(const GPModel& model, const StackedObs& obs,
                             const ParamLayout& lay) {
  Objective out;
  const Eigen::Index n = obs.size();
  Eigen::MatrixXd K = noisy_kernel_matrix(model, obs);
  CholResult chol = cholesky_with_jitter(K, "gradient");
  Eigen::VectorXd alpha;
  out.lml = lml_from_chol(chol, obs.value, &alpha);

  Eigen::MatrixXd M = chol.llt.solve(Eigen::MatrixXd::Identity(n, n));
  M.noalias() -= alpha * alpha.transpose();
  M = -M;  // M = alpha alpha^T - K^-1

  out.grad = Eigen::VectorXd::Zero(lay.size());
  const int D = lay.D;
  const int R = GPModel::kRank;

  for (int q = 0; q < lay.Q; ++q) {
    const Eigen::MatrixXd Bq = model.scale_matrix(q);
    const double v = model.basis[q].bandwidth;
    const double mu = model.basis[q].frequency;

    // A_exp[j, r] = A_q[signal_j, r]
    Eigen::MatrixXd A_exp(n, R);
    for (Eigen::Index j = 0; j < n; ++j) {
      A_exp.row(j) = model.scale_factors[q].row(obs.signal[j]);
    }

    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, R);
    Eigen::VectorXd diag_block(D);
    diag_block.setZero();
    double v_acc = 0.0;
    double mu_acc = 0.0;

    for (Eigen::Index i = 0; i < n; ++i) {
      const int di = obs.signal[i];
      for (Eigen::Index j = 0; j < n; ++j) {
        const double tau = obs.time[i] - obs.time[j];
        const double tau2 = tau * tau;
        const double e = std::exp(-kTwoPiSq * tau2 * v);
        const double c = std::cos(kTwoPi * tau * mu);
        const double s = std::sin(kTwoPi * tau * mu);
        const double kq = e * c;
        const double g = M(i, j) * kq;
        for (int r = 0; r < R; ++r) W(i, r) += g * A_exp(j, r);
        const int dj = obs.signal[j];
        if (di == dj) diag_block[di] += g;
        const double mb = M(i, j) * Bq(di, dj);
        v_acc += mb * (-kTwoPiSq * tau2) * e * c;
        mu_acc += mb * (-kTwoPi * tau) * e * s;
      }
    }

    const int base = q * lay.per_mixture();
    for (Eigen::Index i = 0; i < n; ++i) {
      const int di = obs.signal[i];
      for (int r = 0; r < R; ++r) out.grad[base + di * R + r] += W(i, r);
    }
    for (int d = 0; d < D; ++d) {
      out.grad[base + D * R + d] = 0.5 * diag_block[d] * model.scale_diags[q][d];
    }
    out.grad[lay.basis_offset() + 2 * q] = 0.5 * v_acc * v;
    out.grad[lay.basis_offset() + 2 * q + 1] = 0.5 * mu_acc;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const int d = obs.signal[i];
    out.grad[lay.noise_offset() + d] +=
        0.5 * M(i, i) * (model.noise_var[d] - lay.noise_floor);
  }
  return out;
}

}  // namespace

double basis_kernel(double tau_min, const SpectralBasisParams& p) {
  const double tau2 = tau_min * tau_min;
  return std::exp(-kTwoPiSq * tau2 * p.bandwidth) * std::cos(kTwoPi * tau_min * p.frequency);
}

std::string FitConfig::canonical_string() const {
  return "max_iters=" + std::to_string(max_iters) + ";obs_cap=" + std::to_string(obs_cap) +
         ";noise_floor=" + format_double(noise_floor) +
         ";n_mixtures=" + std::to_string(n_mixtures) +
         ";init_step=" + format_double(init_step) + ";min_step=" + format_double(min_step);
}

std::size_t GPModel::n_observations() const {
  std::size_t n = 0;
  for (const auto& t : obs_times) n += t.size();
  return n;
}

Eigen::MatrixXd GPModel::scale_matrix(int q) const {
  Eigen::MatrixXd B = scale_factors[q] * scale_factors[q].transpose();
  B.diagonal() += scale_diags[q];
  return B;
}

GPModel GPModel::make_init(int n_signals, int n_mixtures) {
  GPModel m;
  m.n_signals = n_signals;
  m.scale_factors.assign(n_mixtures, Eigen::MatrixXd::Zero(n_signals, kRank));
  m.scale_diags.assign(n_mixtures, Eigen::VectorXd::Ones(n_signals));
  m.basis.resize(n_mixtures);
  for (int q = 0; q < n_mixtures; ++q) {
    for (int d = 0; d < n_signals; ++d) {
      m.scale_factors[q](d, (d + q) % kRank) = 0.25;
    }
    m.basis[q].bandwidth = 1e-3;
    m.basis[q].frequency = (q % 2 == 0) ? 0.0 : 1.0 / 720.0;  // 12 h cycle
  }
  m.noise_var = Eigen::VectorXd::Ones(n_signals);
  m.offset = Eigen::VectorXd::Zero(n_signals);
  m.scale = Eigen::VectorXd::Ones(n_signals);
  m.obs_times.assign(n_signals, {});
  m.obs_values.assign(n_signals, {});
  return m;
}

Eigen::MatrixXd lmc_covariance(const GPModel& model,
                               const std::vector<std::vector<double>>& times_by_signal) {
  GPModel probe = model;
  probe.obs_times = times_by_signal;
  probe.obs_values.assign(times_by_signal.size(), {});
  for (std::size_t d = 0; d < times_by_signal.size(); ++d) {
    probe.obs_values[d].assign(times_by_signal[d].size(), 0.0);
  }
  StackedObs obs = stack_observations(probe);
  return kernel_matrix(model, obs);
}

double log_marginal_likelihood(const GPModel& model) {
  StackedObs obs = stack_observations(model);
  return evaluate_lml(model, obs);
}

Eigen::VectorXd pack_hyperparameters(const GPModel& model, double noise_floor) {
  ParamLayout lay{model.n_signals, model.n_mixtures(), noise_floor};
  return pack(model, lay);
}

GPModel with_hyperparameters(const GPModel& model, const Eigen::VectorXd& theta,
                             double noise_floor) {
  ParamLayout lay{model.n_signals, model.n_mixtures(), noise_floor};
  if (theta.size() != lay.size()) {
    throw ValidationError("hyperparameter vector has wrong length");
  }
  GPModel out = model;
  unpack(theta, lay, out);
  return out;
}

std::pair<double, Eigen::VectorXd> lml_with_gradient(const GPModel& model,
                                                     double noise_floor) {
  ParamLayout lay{model.n_signals, model.n_mixtures(), noise_floor};
  StackedObs obs = stack_observations(model);
  Objective obj = evaluate_with_grad(model, obs, lay);
  return {obj.lml, std::move(obj.grad)};
}

GPModel fit_gp(const cohort::PatientEpisode& episode, const FitConfig& config) {
  return fit_gp(episode, GPModel::make_init(static_cast<int>(kNumContinuousSignals),
                                            config.n_mixtures),
                config);
}

GPModel fit_gp(const cohort::PatientEpisode& episode, const GPModel& init,
               const FitConfig& config) {
  const int D = static_cast<int>(kNumContinuousSignals);
  GPModel model = init;
  model.obs_times.assign(D, {});
  model.obs_values.assign(D, {});

  std::size_t total = 0;
  for (const auto& s : episode.samples) {
    if (is_continuous(s.signal)) ++total;
  }
  if (total < 2) {
    throw ValidationError("episode " + episode.admission_id +
                          ": need at least 2 continuous observations to fit");
  }

  // evenly thin oversized episodes to keep the cubic solve tractable
  const double keep = total > config.obs_cap
                          ? static_cast<double>(config.obs_cap) / static_cast<double>(total)
                          : 1.0;
  std::array<double, kNumContinuousSignals> acc{};
  acc.fill(1.0);  // always keep each signal's first observation
  for (const auto& s : episode.samples) {
    if (!is_continuous(s.signal)) continue;
    const auto d = static_cast<std::size_t>(s.signal);
    acc[d] += keep;
    if (acc[d] >= 1.0) {
      acc[d] -= 1.0;
      model.obs_times[d].push_back(s.time_min);
      model.obs_values[d].push_back(s.value);
    }
  }

  // standardize per signal; predictions are mapped back through offset/scale
  model.offset = Eigen::VectorXd::Zero(D);
  model.scale = Eigen::VectorXd::Ones(D);
  for (int d = 0; d < D; ++d) {
    auto& vals = model.obs_values[d];
    if (vals.empty()) continue;
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                        static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    const double sd = std::sqrt(var);
    model.offset[d] = mean;
    model.scale[d] = sd > 1e-9 ? sd : 1.0;
    for (double& v : vals) v = (v - model.offset[d]) / model.scale[d];
  }

  ParamLayout lay{D, model.n_mixtures(), config.noise_floor};
  for (int d = 0; d < D; ++d) {
    model.noise_var[d] = std::max(model.noise_var[d], config.noise_floor * 2.0);
  }
  Eigen::VectorXd theta = pack(model, lay);
  StackedObs obs = stack_observations(model);

  try {
    Objective cur = evaluate_with_grad(model, obs, lay);
    double step = config.init_step;
    for (int iter = 0; iter < config.max_iters; ++iter) {
      const double gnorm = cur.grad.lpNorm<Eigen::Infinity>();
      if (!(gnorm > 0.0) || !std::isfinite(gnorm)) break;
      Eigen::VectorXd dir = cur.grad / std::max(1.0, gnorm);
      bool accepted = false;
      GPModel trial_model = model;
      while (step >= config.min_step) {
        Eigen::VectorXd trial = theta + step * dir;
        unpack(trial, lay, trial_model);
        double lml = -std::numeric_limits<double>::infinity();
        try {
          lml = evaluate_lml(trial_model, obs);
        } catch (const NumericalError&) {
          // treat an indefinite trial point as a failed step
        }
        if (std::isfinite(lml) && lml > cur.lml) {
          theta = std::move(trial);
          model = trial_model;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      cur = evaluate_with_grad(model, obs, lay);
      step = std::min(step * 1.3, 10.0);
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " [patient " + episode.admission_id + "]");
  }
  return model;
}

Eigen::MatrixXd posterior_mean(const GPModel& model,
                               const std::vector<double>& query_times) {
  const int D = model.n_signals;
  const auto G = static_cast<Eigen::Index>(query_times.size());
  Eigen::MatrixXd out(D, G);
  for (int d = 0; d < D; ++d) out.row(d).setConstant(model.offset.size() ? model.offset[d] : 0.0);

  StackedObs obs = stack_observations(model);
  const Eigen::Index n = obs.size();
  if (n == 0 || G == 0) return out;

  Eigen::MatrixXd K = noisy_kernel_matrix(model, obs);
  CholResult chol = cholesky_with_jitter(K, "posterior");
  Eigen::VectorXd alpha = chol.llt.solve(obs.value);

  const int Q = model.n_mixtures();
  std::vector<Eigen::MatrixXd> B(Q);
  for (int q = 0; q < Q; ++q) B[q] = model.scale_matrix(q);

  for (int d = 0; d < D; ++d) {
    const double scale = model.scale.size() ? model.scale[d] : 1.0;
    for (Eigen::Index g = 0; g < G; ++g) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double tau = query_times[static_cast<std::size_t>(g)] - obs.time[i];
        double k = 0.0;
        for (int q = 0; q < Q; ++q) {
          k += B[q](d, obs.signal[i]) * basis_kernel(tau, model.basis[q]);
        }
        acc += k * alpha[i];
      }
      out(d, g) += scale * acc;
      if (!std::isfinite(out(d, g))) {
        throw NumericalError("non-finite posterior mean");
      }
    }
  }
  return out;
}

RegularSeries impute_episode(const cohort::PatientEpisode& episode,
                             const ImputeConfig& config) {
  episode.validate();
  RegularSeries series;
  series.step_min = config.grid_step_min;
  series.n_steps = static_cast<std::size_t>(
      std::ceil(episode.discharge_min / config.grid_step_min));
  if (series.n_steps == 0) series.n_steps = 1;
  series.data.assign(kNumSignals * series.n_steps, 0.0);

  GPModel model = fit_gp(episode, config.fit);
  std::vector<double> grid(series.n_steps);
  for (std::size_t k = 0; k < series.n_steps; ++k) grid[k] = series.time_at(k);
  Eigen::MatrixXd cont = posterior_mean(model, grid);
  for (std::size_t d = 0; d < kNumContinuousSignals; ++d) {
    for (std::size_t k = 0; k < series.n_steps; ++k) {
      series.data[d * series.n_steps + k] = cont(static_cast<int>(d), static_cast<Eigen::Index>(k));
    }
  }

  // discrete signals: mean within each bin, then hold forward; bins before
  // the first observation take the first observed value
  for (Signal sig : {Signal::rass, Signal::vent_mode}) {
    std::vector<double> sums(series.n_steps, 0.0);
    std::vector<int> counts(series.n_steps, 0);
    bool any = false;
    double first_value = 0.0;
    double first_time = std::numeric_limits<double>::infinity();
    for (const auto& s : episode.samples) {
      if (s.signal != sig) continue;
      auto bin = static_cast<std::size_t>(s.time_min / config.grid_step_min);
      if (bin >= series.n_steps) bin = series.n_steps - 1;
      sums[bin] += s.value;
      counts[bin] += 1;
      if (s.time_min < first_time) {
        first_time = s.time_min;
        first_value = s.value;
      }
      any = true;
    }
    double held = any ? first_value : 0.0;
    for (std::size_t k = 0; k < series.n_steps; ++k) {
      if (counts[k] > 0) held = sums[k] / counts[k];
      series.value_ref(sig, k) = held;
    }
  }

  for (double v : series.data) {
    if (!std::isfinite(v)) throw NumericalError("imputed series contains non-finite values");
  }
  return series;
}

}  // namespace ventrl::gp
