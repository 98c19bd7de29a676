#include "ventrl/mlp.hpp"

#include <cmath>

namespace ventrl::ml {

MLPModel::MLPModel(int input_dim, const MLPConfig& config)
    : input_dim_(input_dim), config_(config) {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  for (int h : config.hidden_sizes) sizes.push_back(h);
  sizes.push_back(1);

  Rng rng(config.seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double sd = std::sqrt(2.0 / static_cast<double>(std::max(fan_in, 1)));
    Eigen::MatrixXd W(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) W(i, j) = rng.normal(0.0, sd);
    }
    w_.push_back(std::move(W));
    // slightly positive biases keep rectified units off their kink at init
    b_.push_back(Eigen::VectorXd::Constant(fan_out, 0.01));
  }
  const Eigen::Index p = parameters().size();
  m_ = Eigen::VectorXd::Zero(p);
  v_ = Eigen::VectorXd::Zero(p);
}

void MLPModel::set_normalization(Eigen::VectorXd mean, Eigen::VectorXd sd) {
  if (mean.size() != input_dim_ || sd.size() != input_dim_) {
    throw ValidationError("normalization dimension mismatch");
  }
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    if (!(sd[i] > 0.0)) sd[i] = 1.0;
  }
  norm_mean_ = std::move(mean);
  norm_sd_ = std::move(sd);
}

Eigen::VectorXd MLPModel::normalize(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim_) {
    throw ValidationError("predict: dimension mismatch");
  }
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), input_dim_);
  if (has_normalization()) {
    v = (v - norm_mean_).cwiseQuotient(norm_sd_);
  }
  return v;
}

double MLPModel::predict(std::span<const double> x) const {
  Eigen::VectorXd a = normalize(x);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    a = w_[l] * a + b_[l];
    if (l + 1 < w_.size()) a = a.cwiseMax(0.0);
  }
  return a[0];
}

Eigen::VectorXd MLPModel::predict_batch(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim_) throw ValidationError("predict_batch: dimension mismatch");
  Eigen::MatrixXd A = X;
  if (has_normalization()) {
    A.rowwise() -= norm_mean_.transpose();
    A.array().rowwise() /= norm_sd_.transpose().array();
  }
  for (std::size_t l = 0; l < w_.size(); ++l) {
    A = A * w_[l].transpose();
    A.rowwise() += b_[l].transpose();
    if (l + 1 < w_.size()) A = A.cwiseMax(0.0);
  }
  return A.col(0);
}

Eigen::VectorXd MLPModel::parameters() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) total += w_[l].size() + b_[l].size();
  Eigen::VectorXd theta(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    theta.segment(at, w_[l].size()) = Eigen::Map<const Eigen::VectorXd>(w_[l].data(), w_[l].size());
    at += w_[l].size();
    theta.segment(at, b_[l].size()) = b_[l];
    at += b_[l].size();
  }
  return theta;
}

void MLPModel::set_parameters(const Eigen::VectorXd& theta) {
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(w_[l].data(), w_[l].size()) = theta.segment(at, w_[l].size());
    at += w_[l].size();
    b_[l] = theta.segment(at, b_[l].size());
    at += b_[l].size();
  }
  if (at != theta.size()) throw ValidationError("set_parameters: size mismatch");
}

std::pair<double, Eigen::VectorXd> MLPModel::loss_and_gradient(
    const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
  if (X.cols() != input_dim_) throw ValidationError("loss_and_gradient: dimension mismatch");
  if (X.rows() != y.size()) throw ValidationError("loss_and_gradient: X/y mismatch");
  const auto n = X.rows();
  const auto L = w_.size();

  // batched forward, keeping activations for backprop; rows are samples
  std::vector<Eigen::MatrixXd> act(L + 1);
  act[0] = X;
  if (has_normalization()) {
    act[0].rowwise() -= norm_mean_.transpose();
    act[0].array().rowwise() /= norm_sd_.transpose().array();
  }
  std::vector<Eigen::MatrixXd> pre(L);
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = act[l] * w_[l].transpose();
    pre[l].rowwise() += b_[l].transpose();
    act[l + 1] = l + 1 < L ? pre[l].cwiseMax(0.0) : pre[l];
  }

  const Eigen::VectorXd err = act[L].col(0) - y;
  const double mse = err.squaredNorm() / static_cast<double>(n);

  std::vector<Eigen::MatrixXd> grad_w(L);
  std::vector<Eigen::VectorXd> grad_b(L);
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(n)) * err;
  for (std::size_t l = L; l-- > 0;) {
    grad_w[l].noalias() = delta.transpose() * act[l];
    grad_b[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * w_[l]).cwiseProduct(
          (pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }

  double l2_term = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    l2_term += w_[l].squaredNorm();
    grad_w[l] += 2.0 * config_.l2 * w_[l];
  }
  const double loss = mse + config_.l2 * l2_term;

  Eigen::Index total = 0;
  for (std::size_t l = 0; l < L; ++l) total += w_[l].size() + b_[l].size();
  Eigen::VectorXd grad(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < L; ++l) {
    grad.segment(at, grad_w[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(grad_w[l].data(), grad_w[l].size());
    at += grad_w[l].size();
    grad.segment(at, grad_b[l].size()) = grad_b[l];
    at += grad_b[l].size();
  }
  return {loss, std::move(grad)};
}

void MLPModel::adam_update(const Eigen::VectorXd& grad) {
  step_ += 1;
  if (config_.optimizer == MLPOptimizer::sgd) {
    set_parameters(parameters() - config_.learning_rate * grad);
    return;
  }
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const Eigen::ArrayXd m_hat = m_.array() / bc1;
  const Eigen::ArrayXd v_hat = v_.array() / bc2;
  const Eigen::VectorXd update = (m_hat / (v_hat.sqrt() + config_.epsilon)).matrix();
  set_parameters(parameters() - config_.learning_rate * update);
}

double MLPModel::fit_epoch(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           int batch_size) {
  if (X.rows() != y.size()) throw ValidationError("fit_epoch: X/y mismatch");
  if (X.rows() == 0) throw ValidationError("fit_epoch: empty batch");
  if (batch_size < 1) batch_size = static_cast<int>(X.rows());

  for (Eigen::Index start = 0; start < X.rows(); start += batch_size) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, X.rows() - start);
    const auto [loss, grad] = loss_and_gradient(X.middleRows(start, len), y.segment(start, len));
    if (!std::isfinite(loss)) {
      throw NumericalError("training diverged: non-finite loss at step " +
                           std::to_string(step_) + " (batch at row " +
                           std::to_string(start) + ")");
    }
    adam_update(grad);
  }

  const Eigen::VectorXd pred = predict_batch(X);
  const double mse = (pred - y).squaredNorm() / static_cast<double>(X.rows());
  if (!std::isfinite(mse)) {
    throw NumericalError("training diverged: non-finite post-epoch loss");
  }
  return mse;
}

void MLPModel::sgd_step(std::span<const double> x, double target, double alpha) {
  Eigen::MatrixXd X(1, input_dim_);
  for (int j = 0; j < input_dim_; ++j) X(0, j) = x[static_cast<std::size_t>(j)];
  Eigen::VectorXd y(1);
  y[0] = target;
  const auto [loss, grad] = loss_and_gradient(X, y);
  if (!std::isfinite(loss)) throw NumericalError("TD update diverged: non-finite loss");
  set_parameters(parameters() - alpha * grad);
}

}  // namespace ventrl::ml
