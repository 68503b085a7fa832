#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace nalda {

// Deterministic random primitives. Every distribution is hand-rolled on top of
// the raw mt19937_64 word stream; std::*_distribution is never used because its
// output is implementation-defined and would break seed reproducibility across
// standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in (0,1), endpoints excluded
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }

  double gaussian() {
    // Box-Muller, cosine branch
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kTwoPi * u2);
  }

  // Knuth's product method; adequate for the desk-scale means used here.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  // Marsaglia-Tsang squeeze for shape >= 1, boosted for shape < 1.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = gaussian();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Symmetric Dirichlet draw of dimension k.
  std::vector<double> dirichlet(int k, double concentration) {
    std::vector<double> out(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& g : out) {
      g = gamma(concentration);
      sum += g;
    }
    if (sum <= 0.0) {
      std::fill(out.begin(), out.end(), 1.0 / k);
      return out;
    }
    for (auto& g : out) g /= sum;
    return out;
  }

  // Draw from a categorical distribution given (possibly unnormalized)
  // nonnegative weights.
  int categorical(const std::vector<double>& weights) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) return uniform_int(static_cast<int>(weights.size()));
    double target = uniform01() * total;
    double run = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      run += weights[i];
      if (target <= run) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // m distinct indices out of [0, n), returned in ascending order.
  // When m >= n the full range is returned.
  std::vector<int> sample_without_replacement(int n, int m) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (m >= n) return idx;
    for (int i = 0; i < m; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());
    return idx;
  }

private:
  static constexpr double kTwoPi = 6.283185307179586;
  std::mt19937_64 eng_;
};

// Stable derivation of independent sub-seeds (message init, parameter init,
// pair sampling, dropout, ...) from one user seed. SplitMix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace nalda
