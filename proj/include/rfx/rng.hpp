#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rfx {

/* mt19937_64 core with hand-rolled transforms. The engine's output sequence
   is pinned by the standard, the <random> distributions are not, so every
   sample an experiment takes goes through this class to keep seeded runs
   reproducible. */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // uniform in [0,1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  int uniform_int(int n) {
    int k = static_cast<int>(uniform() * n);
    return k < n ? k : n - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // index ~ weights (need not be normalized if total given)
  int categorical(const double* w, int n, double total = 1.0) {
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  double exponential() {
    double u = uniform();
    while (u <= 1e-300) u = uniform();
    return -std::log(u);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rfx
