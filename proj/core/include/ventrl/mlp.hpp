#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ventrl/common.hpp"

namespace ventrl::ml {

enum class MLPOptimizer : int { adam = 0, sgd = 1 };

struct MLPConfig {
  std::vector<int> hidden_sizes = {64, 64};
  double learning_rate = 1e-3;
  double l2 = 1e-4;  // applied to weights, not biases
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  MLPOptimizer optimizer = MLPOptimizer::adam;
  std::uint64_t seed = 1;
};

/// Feedforward network with rectified-linear hidden layers and a linear
/// output, trained on squared error plus an l2 weight penalty. Inputs are
/// z-scored with stored statistics when normalization is set.
class MLPModel {
 public:
  MLPModel() = default;
  MLPModel(int input_dim, const MLPConfig& config);

  int input_dim() const { return input_dim_; }
  const MLPConfig& config() const { return config_; }

  void set_normalization(Eigen::VectorXd mean, Eigen::VectorXd sd);
  bool has_normalization() const { return norm_mean_.size() > 0; }
  const Eigen::VectorXd& norm_mean() const { return norm_mean_; }
  const Eigen::VectorXd& norm_sd() const { return norm_sd_; }

  double predict(std::span<const double> x) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& X) const;  // rows = samples

  /// One pass over X in row order with mini-batch updates; returns the
  /// post-epoch mean squared error on (X, y). Throws NumericalError if the
  /// loss diverges.
  double fit_epoch(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int batch_size);

  /// Single-sample squared-error step with an explicit learning rate,
  /// bypassing moment accumulators (the incremental TD update).
  void sgd_step(std::span<const double> x, double target, double alpha);

  /// Total loss (MSE + l2) and the gradient w.r.t. the flat parameter
  /// vector, for optimizer steps and finite-difference verification.
  std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::MatrixXd& X,
                                                       const Eigen::VectorXd& y) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  std::int64_t step_count() const { return step_; }

  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }
  std::vector<Eigen::MatrixXd>& mutable_weights() { return w_; }
  std::vector<Eigen::VectorXd>& mutable_biases() { return b_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  Eigen::VectorXd normalize(std::span<const double> x) const;
  void adam_update(const Eigen::VectorXd& grad);

  int input_dim_ = 0;
  MLPConfig config_;
  std::vector<Eigen::MatrixXd> w_;  // layer weights, out x in
  std::vector<Eigen::VectorXd> b_;
  Eigen::VectorXd norm_mean_, norm_sd_;

  Eigen::VectorXd m_, v_;  // first/second moment accumulators
  std::int64_t step_ = 0;
};

}  // namespace ventrl::ml
