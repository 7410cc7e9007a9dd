#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "scattn/types.hpp"

namespace scattn {

/// Singly-constrained separable quadratic program:
///
///   minimize    sum_j weight_j * x_j^2
///   subject to  sum_j weight_j * x_j = budget,
///               lower_j <= x_j <= upper_j.
///
/// Weights must be nonnegative; +-inf box edges are allowed.
struct QkProblem {
  Vec lower;
  Vec upper;
  Vec weight;
  double budget = 0.0;
};

/// Minimizer plus the shared clamp level: x_j = clamp(level, lower_j, upper_j).
struct QkSolution {
  Vec x;
  double level = 0.0;
};

/// How the pivot is picked from the live split points. Any in-range choice is
/// correct; only the expected complexity differs.
enum class PivotRule {
  kIntroselectMedian,  // std::nth_element; expected linear overall
  kMedianOfMedians,    // worst-case linear selection
  kFirstSplitPoint,    // degenerate choice, may scan O(J^2); for tests
};

struct QkOptions {
  PivotRule pivot = PivotRule::kIntroselectMedian;
};

/// Work counters, exposed for complexity checks.
struct QkStats {
  std::size_t split_points_inspected = 0;
  std::size_t rounds = 0;
};

namespace detail {

/// k-th smallest (0-based) by median-of-medians partitioning.
inline double mom_select(std::vector<double> v, std::size_t k) {
  while (true) {
    const std::size_t n = v.size();
    if (n <= 10) {
      std::sort(v.begin(), v.end());
      return v[k];
    }
    std::vector<double> medians;
    medians.reserve((n + 4) / 5);
    for (std::size_t i = 0; i < n; i += 5) {
      const std::size_t last = std::min(i + 5, n);
      std::sort(v.begin() + i, v.begin() + last);
      medians.push_back(v[i + (last - i - 1) / 2]);
    }
    const std::size_t m = medians.size();
    const double pivot = mom_select(std::move(medians), (m - 1) / 2);

    std::vector<double> lt, gt;
    std::size_t eq = 0;
    for (double x : v) {
      if (x < pivot) {
        lt.push_back(x);
      } else if (x > pivot) {
        gt.push_back(x);
      } else {
        ++eq;
      }
    }
    if (k < lt.size()) {
      v = std::move(lt);
    } else if (k < lt.size() + eq) {
      return pivot;
    } else {
      k -= lt.size() + eq;
      v = std::move(gt);
    }
  }
}

inline double select_pivot(std::vector<double>& pts, PivotRule rule) {
  switch (rule) {
    case PivotRule::kFirstSplitPoint:
      return pts.front();
    case PivotRule::kMedianOfMedians:
      return mom_select(pts, (pts.size() - 1) / 2);
    case PivotRule::kIntroselectMedian:
    default: {
      const auto mid = pts.begin() + static_cast<std::ptrdiff_t>(pts.size() / 2);
      std::nth_element(pts.begin(), mid, pts.end());
      return *mid;
    }
  }
}

}  // namespace detail

/// Solves the knapsack by shrinking an interval of candidate clamp levels
/// around the median of the live split points. The sum
/// g(y) = sum_j weight_j * clamp(y, lower_j, upper_j) is nondecreasing and
/// piecewise linear; the answer is its root at the budget. Coordinates whose
/// box lies entirely on one side of the interval move into a pinned sum, ones
/// spanning the whole interval into a slope accumulator, so each round only
/// touches the still-ambiguous coordinates.
inline QkSolution solve_qk(const QkProblem& p, const QkOptions& opt = {},
                           QkStats* stats = nullptr) {
  const std::size_t n = p.lower.size();
  if (p.upper.size() != n || p.weight.size() != n) {
    throw LengthMismatch("solve_qk: lower/upper/weight lengths differ");
  }
  if (!std::isfinite(p.budget)) {
    throw std::invalid_argument("solve_qk: budget must be finite");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(p.lower[j]) || std::isnan(p.upper[j]) || std::isnan(p.weight[j])) {
      throw std::invalid_argument("solve_qk: NaN in problem data");
    }
    if (p.lower[j] > p.upper[j]) {
      throw std::invalid_argument("solve_qk: lower > upper at coordinate " +
                                  std::to_string(j));
    }
    if (p.weight[j] < 0.0) {
      throw std::invalid_argument("solve_qk: negative weight at coordinate " +
                                  std::to_string(j));
    }
  }

  const double budget_tol = 1e-9 * std::max(1.0, std::fabs(p.budget));

  auto clamp_all = [&](double y) {
    QkSolution s;
    s.level = y;
    s.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      s.x[j] = std::clamp(y, p.lower[j], p.upper[j]);
    }
    return s;
  };

  // Feasible budgets span [sum w*lower, sum w*upper]. Zero-weight coordinates
  // contribute nothing and are kept out of every sum below.
  double lo_sum = 0.0;
  double hi_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (p.weight[j] == 0.0) continue;
    lo_sum += p.weight[j] * p.lower[j];
    hi_sum += p.weight[j] * p.upper[j];
  }

  if (p.budget >= hi_sum) {  // fully saturated at the top (or infeasible)
    if (p.budget > hi_sum + budget_tol) {
      throw InfeasibleBudget("solve_qk: budget exceeds sum(weight*upper)");
    }
    double y = -kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.weight[j] > 0.0) y = std::max(y, p.upper[j]);
    }
    if (y == -kInf) y = 0.0;  // no weighted coordinates at all
    return clamp_all(y);
  }
  if (p.budget <= lo_sum) {
    if (p.budget < lo_sum - budget_tol) {
      throw InfeasibleBudget("solve_qk: budget below sum(weight*lower)");
    }
    double y = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.weight[j] > 0.0) y = std::min(y, p.lower[j]);
    }
    if (y == kInf) y = 0.0;
    return clamp_all(y);
  }

  std::vector<std::uint32_t> work;
  work.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (p.weight[j] > 0.0) work.push_back(static_cast<std::uint32_t>(j));
  }

  double level_lo = -kInf;
  double level_hi = kInf;
  double pinned = 0.0;  // sum w*bound over coordinates clamped on the interval
  double slope = 0.0;   // sum w over coordinates linear on the interval

  std::vector<double> splits;
  splits.reserve(2 * work.size());

  while (!work.empty()) {
    if (stats) ++stats->rounds;

    // Live split points strictly inside (level_lo, level_hi). Points on the
    // boundary belong to already-decided coordinates.
    splits.clear();
    for (auto j : work) {
      if (p.lower[j] > level_lo && p.lower[j] < level_hi) splits.push_back(p.lower[j]);
      if (p.upper[j] > level_lo && p.upper[j] < level_hi) splits.push_back(p.upper[j]);
    }
    if (stats) stats->split_points_inspected += splits.size();

    if (!splits.empty()) {
      const double pivot = detail::select_pivot(splits, opt.pivot);
      double g = pinned + slope * pivot;
      for (auto j : work) {
        if (p.upper[j] < pivot) {
          g += p.weight[j] * p.upper[j];
        } else if (p.lower[j] > pivot) {
          g += p.weight[j] * p.lower[j];
        } else {
          g += p.weight[j] * pivot;
        }
      }
      if (g <= p.budget) level_lo = pivot;
      if (g >= p.budget) level_hi = pivot;
    }

    // Re-classify against the narrowed interval. The boundary comparisons are
    // closed: a box ending exactly at level_lo is clamped for every candidate
    // level in the interval.
    std::size_t keep = 0;
    for (auto j : work) {
      if (p.upper[j] <= level_lo) {
        pinned += p.weight[j] * p.upper[j];
      } else if (p.lower[j] >= level_hi) {
        pinned += p.weight[j] * p.lower[j];
      } else if (p.lower[j] <= level_lo && p.upper[j] >= level_hi) {
        slope += p.weight[j];
      } else {
        work[keep++] = j;
      }
    }
    work.resize(keep);

    if (splits.empty()) {
      // No interior split point: every live coordinate was pinned or linear
      // over the whole interval, so the sweep above drained the set.
      assert(work.empty());
      break;
    }
  }

  double y;
  if (slope > 0.0) {
    y = (p.budget - pinned) / slope;
  } else {
    if (std::fabs(pinned - p.budget) >
        1e-8 * std::max(1.0, std::fabs(p.budget))) {
      throw DegenerateWeights("solve_qk: no free coordinate but pinned sum != budget");
    }
    if (std::isfinite(level_lo) && std::isfinite(level_hi)) {
      y = 0.5 * (level_lo + level_hi);
    } else if (std::isfinite(level_lo)) {
      y = level_lo;
    } else if (std::isfinite(level_hi)) {
      y = level_hi;
    } else {
      y = 0.0;
    }
  }
  return clamp_all(y);
}

/// Rewrites the bounded simplex projection min ||alpha - z||^2 over
/// {0 <= alpha <= u, sum alpha = 1} as a QkProblem. Invert a solution with
/// alpha_j = z_j + 2*x_j; the projection threshold is tau = -2*level.
inline QkProblem map_csparsemax(const Vec& z, const Vec& u) {
  check_scores(z);
  check_bounds(u, z.size());
  const std::size_t n = z.size();
  QkProblem p;
  p.lower.resize(n);
  p.upper.resize(n);
  p.weight.assign(n, 1.0);
  double score_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p.lower[j] = -0.5 * z[j];
    p.upper[j] = (u[j] == kInf) ? kInf : 0.5 * (u[j] - z[j]);
    score_sum += z[j];
  }
  p.budget = 0.5 * (1.0 - score_sum);
  return p;
}

}  // namespace scattn
