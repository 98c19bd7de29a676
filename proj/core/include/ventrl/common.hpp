#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ventrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Mixing function used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random source. All sampling in the project goes through this
/// wrapper so that call sequences are explicit and reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    // modulo bias is negligible for n << 2^64 but rejection keeps it exact
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sd * spare_;
    }
    double u1, u2;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return mean + sd * r * std::cos(theta);
  }

  /// Exponential with the given mean (not rate). mean == 0 gives the
  /// degenerate point mass at 0.
  double exponential(double mean) {
    if (mean <= 0.0) return 0.0;
    double u;
    do {
      u = uniform01();
    } while (u <= 0.0);
    return -mean * std::log(u);
  }

  double lognormal(double log_mean, double log_sd) {
    return std::exp(normal(log_mean, log_sd));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

  Rng child(std::uint64_t stream) const { return Rng(mix_seed(base_, stream)); }

  static Rng seeded(std::uint64_t seed) {
    Rng r(seed);
    r.base_ = seed;
    return r;
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t base_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; results
/// must be written to index-addressed storage so the outcome does not depend
/// on the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

int default_thread_count();

/// Shortest round-trip decimal representation, used by every writer so that
/// artifacts are byte-stable.
std::string format_double(double v);

double parse_double(std::string_view s, const std::string& context);
long parse_long(std::string_view s, const std::string& context);

/// FNV-1a, used to fingerprint configuration blocks embedded in artifacts.
std::uint64_t fnv1a(std::string_view data);
std::string hash_hex(std::uint64_t h);

}  // namespace ventrl
