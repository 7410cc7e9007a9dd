#pragma once

#include <cstdint>
#include <random>

#include "scattn/qk_solver.hpp"
#include "scattn/types.hpp"

namespace testsup {

using scattn::kInf;
using scattn::Vec;

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double unit() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  int below(int m) { return static_cast<int>(eng() % static_cast<std::uint64_t>(m)); }
  bool chance(double p) { return unit() < p; }
};

struct QkInstanceOpts {
  bool allow_infinite = true;
  bool allow_zero_weight = false;
  bool allow_pinned = true;
};

/// Random knapsack instance with a budget obtained by clamping a random level
/// into the boxes, so feasibility holds by construction.
inline scattn::QkProblem random_qk(Rng& rng, std::size_t n,
                                   const QkInstanceOpts& opts = {}) {
  scattn::QkProblem p;
  p.lower.resize(n);
  p.upper.resize(n);
  p.weight.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double lo = rng.uniform(-3.0, 3.0);
    double hi = lo + rng.uniform(0.0, 2.0);
    if (opts.allow_pinned && rng.chance(0.1)) hi = lo;
    if (opts.allow_infinite && rng.chance(0.1)) lo = -kInf;
    if (opts.allow_infinite && rng.chance(0.1)) hi = kInf;
    p.lower[j] = lo;
    p.upper[j] = hi;
    p.weight[j] = opts.allow_zero_weight && rng.chance(0.1)
                      ? 0.0
                      : rng.uniform(0.05, 2.0);
  }
  const double level = rng.uniform(-4.0, 4.0);
  double budget = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    budget += p.weight[j] * std::clamp(level, p.lower[j], p.upper[j]);
  }
  p.budget = budget;
  return p;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a[i] - b[i]));
  }
  return m;
}

}  // namespace testsup
