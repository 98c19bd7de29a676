#pragma once

// Independently coded single-output GP regression oracle. Deliberately
// avoids the production linear algebra path: plain Gaussian elimination
// with partial pivoting on the dense system, no Cholesky, no Eigen.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

// kernel k(tau) = sum_q b_q * exp(-2 pi^2 tau^2 v_q) cos(2 pi tau mu_q)
struct ScalarKernel {
  std::vector<double> b;
  std::vector<double> v;
  std::vector<double> mu;

  double operator()(double tau) const {
    constexpr double pi = 3.14159265358979323846;
    double k = 0.0;
    for (std::size_t q = 0; q < b.size(); ++q) {
      k += b[q] * std::exp(-2.0 * pi * pi * tau * tau * v[q]) *
           std::cos(2.0 * pi * tau * mu[q]);
    }
    return k;
  }
};

inline std::vector<double> solve_dense(std::vector<std::vector<double>> A,
                                       std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(A[r][col]) > std::fabs(A[pivot][col])) pivot = r;
    }
    if (std::fabs(A[pivot][col]) < 1e-300) throw std::runtime_error("singular system");
    std::swap(A[col], A[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double acc = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= A[r][c] * x[c];
    x[r] = acc / A[r][r];
  }
  return x;
}

// zero-mean posterior mean at query times
inline std::vector<double> gp_posterior_mean(const ScalarKernel& kernel,
                                             const std::vector<double>& times,
                                             const std::vector<double>& values,
                                             double noise_var,
                                             const std::vector<double>& query) {
  const std::size_t n = times.size();
  std::vector<std::vector<double>> K(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) K[i][j] = kernel(times[i] - times[j]);
    K[i][i] += noise_var;
  }
  const std::vector<double> alpha = solve_dense(std::move(K), values);
  std::vector<double> out(query.size(), 0.0);
  for (std::size_t g = 0; g < query.size(); ++g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += kernel(query[g] - times[i]) * alpha[i];
    out[g] = acc;
  }
  return out;
}

}  // namespace oracles
