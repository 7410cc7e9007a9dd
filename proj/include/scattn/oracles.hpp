#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scattn/qk_solver.hpp"
#include "scattn/simplex_transforms.hpp"
#include "scattn/types.hpp"

// Independent correctness machinery: exhaustive KKT solvers for the
// constrained projections, a sort-based knapsack reference, certificate
// validation, and a central-difference Jacobian checker. Everything here is
// deliberately simple and kept apart from the fast paths it gates.

namespace scattn::oracles {

/// Slack applied to the KKT inequality checks to absorb roundoff.
inline constexpr double kKktSlack = 1e-10;

// ---------------------------------------------------------------------------
// Brute-force constrained projections (exponential; J <= 12)
// ---------------------------------------------------------------------------

struct PartitionSolution {
  ProjectionCertificate cert;
  Vec weights;
};

/// Enumerates all 3^J (zero, free, clipped) partitions for the bounded
/// Euclidean projection and keeps those passing the KKT filter. Generic
/// inputs admit exactly one.
inline std::vector<PartitionSolution> csparsemax_partitions(const Vec& z,
                                                            const Vec& u) {
  check_scores(z);
  check_bounds(u, z.size());
  check_bound_feasibility(u);
  const int n = static_cast<int>(z.size());
  if (n > 12) throw std::invalid_argument("oracle_csparsemax: J > 12");

  std::vector<PartitionSolution> found;
  std::vector<int> label(static_cast<std::size_t>(n), 0);  // 0 zero, 1 free, 2 clipped
  long total = 1;
  for (int j = 0; j < n; ++j) total *= 3;

  for (long mask = 0; mask < total; ++mask) {
    long m = mask;
    bool bad = false;
    for (int j = 0; j < n; ++j) {
      label[static_cast<std::size_t>(j)] = static_cast<int>(m % 3);
      m /= 3;
      if (label[static_cast<std::size_t>(j)] == 2 && u[static_cast<std::size_t>(j)] == kInf) {
        bad = true;  // an infinite bound can never be attained
        break;
      }
    }
    if (bad) continue;

    int free_count = 0;
    double zsum = 0.0;
    double usum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (label[static_cast<std::size_t>(j)] == 1) {
        ++free_count;
        zsum += z[static_cast<std::size_t>(j)];
      } else if (label[static_cast<std::size_t>(j)] == 2) {
        usum += u[static_cast<std::size_t>(j)];
      }
    }

    double tau;
    bool ok = true;
    if (free_count > 0) {
      tau = (zsum + usum - 1.0) / static_cast<double>(free_count);
      for (int j = 0; j < n && ok; ++j) {
        const double v = z[static_cast<std::size_t>(j)] - tau;
        switch (label[static_cast<std::size_t>(j)]) {
          case 0: ok = v <= kKktSlack; break;
          case 1: ok = v >= -kKktSlack && v <= u[static_cast<std::size_t>(j)] + kKktSlack; break;
          case 2: ok = v >= u[static_cast<std::size_t>(j)] - kKktSlack; break;
        }
      }
    } else {
      // Fully saturated: the clipped bounds must carry exactly the whole
      // mass, and a multiplier must separate the zero and clipped sets.
      ok = std::fabs(usum - 1.0) <= kKktSlack;
      double lo = -kInf;  // tau must be >= every zero-set score
      double hi = kInf;   // and <= every clipped-set score minus its bound
      for (int j = 0; j < n; ++j) {
        if (label[static_cast<std::size_t>(j)] == 0) {
          lo = std::max(lo, z[static_cast<std::size_t>(j)]);
        } else {
          hi = std::min(hi, z[static_cast<std::size_t>(j)] - u[static_cast<std::size_t>(j)]);
        }
      }
      ok = ok && lo <= hi + kKktSlack;
      if (std::isfinite(lo) && std::isfinite(hi)) {
        tau = 0.5 * (lo + hi);
      } else if (std::isfinite(lo)) {
        tau = lo;
      } else if (std::isfinite(hi)) {
        tau = hi;
      } else {
        tau = 0.0;
      }
    }
    if (!ok) continue;

    PartitionSolution sol;
    sol.cert.tau = tau;
    sol.weights.assign(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(j);
      switch (label[k]) {
        case 0: sol.cert.zero.push_back(j); break;
        case 1:
          sol.cert.free.push_back(j);
          sol.weights[k] = z[k] - tau;
          break;
        case 2:
          sol.cert.clipped.push_back(j);
          sol.weights[k] = u[k];
          break;
      }
    }
    found.push_back(std::move(sol));
  }
  return found;
}

inline Vec oracle_csparsemax(const Vec& z, const Vec& u) {
  const auto sols = csparsemax_partitions(z, u);
  if (sols.empty()) {
    throw NoFeasiblePartition("oracle_csparsemax: no partition passes the KKT filter");
  }
  return sols.front().weights;
}

/// Enumerates all 2^J clipped sets for the bounded KL projection. Free
/// coordinates share the exponential shape scaled to the leftover mass.
inline std::vector<PartitionSolution> csoftmax_clip_sets(const Vec& z, const Vec& u) {
  check_scores(z);
  check_bounds(u, z.size());
  check_bound_feasibility(u);
  const int n = static_cast<int>(z.size());
  if (n > 12) throw std::invalid_argument("oracle_csoftmax: J > 12");

  const double zmax = *std::max_element(z.begin(), z.end());
  Vec w(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    w[static_cast<std::size_t>(j)] =
        std::max(std::exp(z[static_cast<std::size_t>(j)] - zmax),
                 std::numeric_limits<double>::min());
  }

  std::vector<PartitionSolution> found;
  for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
    double usum = 0.0;
    double zfree = 0.0;
    bool bad = false;
    for (int j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (mask & (1ul << j)) {
        if (u[k] == kInf) {
          bad = true;
          break;
        }
        usum += u[k];
      } else {
        zfree += w[k];
      }
    }
    if (bad) continue;
    const double s = 1.0 - usum;
    if (s < -kKktSlack) continue;

    bool ok = true;
    PartitionSolution sol;
    sol.weights.assign(static_cast<std::size_t>(n), 0.0);
    if (mask + 1 == (1ul << n)) {  // everything clipped
      ok = std::fabs(s) <= kKktSlack;
      for (int j = 0; j < n && ok; ++j) {
        sol.weights[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j)];
        sol.cert.clipped.push_back(j);
      }
      sol.cert.tau = 0.0;
    } else {
      const double sp = std::max(s, 0.0);
      for (int j = 0; j < n && ok; ++j) {
        const auto k = static_cast<std::size_t>(j);
        if (mask & (1ul << j)) {
          // clipped coordinates must want at least their bound
          ok = sp * w[k] >= (u[k] - kKktSlack) * zfree;
          sol.weights[k] = u[k];
          sol.cert.clipped.push_back(j);
        } else {
          const double a = sp * w[k] / zfree;
          ok = a < u[k] + kKktSlack;
          sol.weights[k] = a;
          sol.cert.free.push_back(j);
        }
      }
      sol.cert.tau = sp;
    }
    if (ok) found.push_back(std::move(sol));
  }
  return found;
}

inline Vec oracle_csoftmax(const Vec& z, const Vec& u) {
  const auto sols = csoftmax_clip_sets(z, u);
  if (sols.empty()) {
    throw NoFeasiblePartition("oracle_csoftmax: no clip set passes the KKT filter");
  }
  return sols.front().weights;
}

// ---------------------------------------------------------------------------
// Sort-based knapsack reference
// ---------------------------------------------------------------------------

/// O(J log J) reference for solve_qk: sort the finite split points, binary
/// search for the segment bracketing the budget with direct evaluations of
/// g(y) = sum w*clamp(y, lo, hi), then interpolate inside the segment.
inline QkSolution solve_qk_by_sort(const QkProblem& p) {
  const std::size_t n = p.lower.size();
  auto eval = [&](double y) {
    double g = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.weight[j] == 0.0) continue;
      g += p.weight[j] * std::clamp(y, p.lower[j], p.upper[j]);
    }
    return g;
  };

  std::vector<double> pts;
  pts.reserve(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    if (p.weight[j] == 0.0) continue;
    if (std::isfinite(p.lower[j])) pts.push_back(p.lower[j]);
    if (std::isfinite(p.upper[j])) pts.push_back(p.upper[j]);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  auto finish = [&](double y) {
    QkSolution s;
    s.level = y;
    s.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      s.x[j] = std::clamp(y, p.lower[j], p.upper[j]);
    }
    return s;
  };

  auto segment_root = [&](double left, double right, double gl) {
    // g is linear between adjacent split points
    double slope = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.weight[j] == 0.0) continue;
      if (p.lower[j] <= left && p.upper[j] >= right) slope += p.weight[j];
    }
    if (slope <= 0.0) return left;  // flat segment; g == budget throughout
    return left + (p.budget - gl) / slope;
  };

  if (pts.empty()) {
    double slope = 0.0;
    for (std::size_t j = 0; j < n; ++j) slope += p.weight[j];
    if (slope <= 0.0) {
      if (std::fabs(p.budget) > 1e-8 * std::max(1.0, std::fabs(p.budget))) {
        throw InfeasibleBudget("solve_qk_by_sort: zero weights, nonzero budget");
      }
      return finish(0.0);
    }
    return finish(p.budget / slope);
  }

  const double gfirst = eval(pts.front());
  const double feas_tol = 1e-9 * std::max(1.0, std::fabs(p.budget));
  if (p.budget <= gfirst) {
    // root at or below the lowest split point
    double slope = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.weight[j] > 0.0 && p.lower[j] == -kInf) slope += p.weight[j];
    }
    if (slope <= 0.0) {
      if (p.budget < gfirst - feas_tol) {
        throw InfeasibleBudget("solve_qk_by_sort: budget below reachable range");
      }
      return finish(pts.front());
    }
    return finish(pts.front() - (gfirst - p.budget) / slope);
  }
  const double glast = eval(pts.back());
  if (p.budget >= glast) {
    double slope = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (p.weight[j] > 0.0 && p.upper[j] == kInf) slope += p.weight[j];
    }
    if (slope <= 0.0) {
      if (p.budget > glast + feas_tol) {
        throw InfeasibleBudget("solve_qk_by_sort: budget above reachable range");
      }
      return finish(pts.back());
    }
    return finish(pts.back() + (p.budget - glast) / slope);
  }

  // invariant: eval(pts[lo]) < budget < eval(pts[hi])
  std::size_t lo = 0;
  std::size_t hi = pts.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (eval(pts[mid]) < p.budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return finish(segment_root(pts[lo], pts[hi], eval(pts[lo])));
}

// ---------------------------------------------------------------------------
// Certificate validation
// ---------------------------------------------------------------------------

struct CertificateIssues {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Checks partition coverage, feasibility, stationarity, and complementary
/// slackness of a forward result against its certificate.
inline CertificateIssues validate_certificate(Transform t, const Vec& z,
                                              const Vec* u, const Vec& weights,
                                              const ProjectionCertificate& cert,
                                              double tol = 1e-9) {
  CertificateIssues out;
  auto fail = [&](const std::string& msg) { out.problems.push_back(msg); };
  const std::size_t n = z.size();

  std::vector<int> seen(n, 0);
  for (int j : cert.free) ++seen[static_cast<std::size_t>(j)];
  for (int j : cert.zero) ++seen[static_cast<std::size_t>(j)];
  for (int j : cert.clipped) ++seen[static_cast<std::size_t>(j)];
  for (std::size_t j = 0; j < n; ++j) {
    if (seen[j] != 1) {
      fail("partition does not cover coordinate " + std::to_string(j) +
           " exactly once");
    }
  }

  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    total += weights[j];
    if (weights[j] < -tol) fail("negative weight at " + std::to_string(j));
    if (u && weights[j] > (*u)[j] + tol) fail("weight above bound at " + std::to_string(j));
  }
  if (std::fabs(total - 1.0) > tol) fail("weights do not sum to 1");

  for (int j : cert.zero) {
    if (std::fabs(weights[static_cast<std::size_t>(j)]) > tol) {
      fail("zero-set weight not zero at " + std::to_string(j));
    }
  }

  if (t == Transform::sparsemax || t == Transform::csparsemax) {
    for (int j : cert.free) {
      const auto k = static_cast<std::size_t>(j);
      if (std::fabs(weights[k] - (z[k] - cert.tau)) > tol) {
        fail("free-set stationarity broken at " + std::to_string(j));
      }
      if (weights[k] < -tol) fail("free-set weight negative at " + std::to_string(j));
      if (u && weights[k] > (*u)[k] + tol) {
        fail("free-set weight above bound at " + std::to_string(j));
      }
    }
    for (int j : cert.clipped) {
      const auto k = static_cast<std::size_t>(j);
      if (!u) {
        fail("clipped set must be empty without bounds");
        break;
      }
      if ((*u)[k] == kInf) {
        fail("clipped coordinate has infinite bound at " + std::to_string(j));
      } else if (std::fabs(weights[k] - (*u)[k]) > tol) {
        fail("clipped weight differs from bound at " + std::to_string(j));
      }
    }
    if (!cert.free.empty()) {
      double acc = -1.0;
      for (int j : cert.free) acc += z[static_cast<std::size_t>(j)];
      if (u) {
        for (int j : cert.clipped) acc += (*u)[static_cast<std::size_t>(j)];
      }
      const double tau = acc / static_cast<double>(cert.free.size());
      if (std::fabs(tau - cert.tau) > tol) fail("tau inconsistent with partition");
    } else {
      double usum = 0.0;
      if (u) {
        for (int j : cert.clipped) usum += (*u)[static_cast<std::size_t>(j)];
      }
      if (std::fabs(usum - 1.0) > tol) {
        fail("empty free set but clipped bounds do not sum to 1");
      }
    }
  } else if (t == Transform::csoftmax) {
    if (!cert.zero.empty()) fail("csoftmax certificate must have an empty zero set");
    if (!u) {
      fail("csoftmax certificate needs bounds");
      return out;
    }
    const double s = cert.tau;
    double usum = 0.0;
    for (int j : cert.clipped) usum += (*u)[static_cast<std::size_t>(j)];
    if (std::fabs(usum + s - 1.0) > tol) fail("clipped mass plus s does not equal 1");

    const double zmax = *std::max_element(z.begin(), z.end());
    double zfree = 0.0;
    for (int j : cert.free) zfree += std::exp(z[static_cast<std::size_t>(j)] - zmax);
    for (int j : cert.free) {
      const auto k = static_cast<std::size_t>(j);
      const double expected = s * std::exp(z[k] - zmax) / zfree;
      if (std::fabs(weights[k] - expected) > tol) {
        fail("free-set exponential shape broken at " + std::to_string(j));
      }
    }
    for (int j : cert.clipped) {
      const auto k = static_cast<std::size_t>(j);
      if ((*u)[k] == kInf) {
        fail("clipped coordinate has infinite bound at " + std::to_string(j));
        continue;
      }
      if (std::fabs(weights[k] - (*u)[k]) > tol) {
        fail("clipped weight differs from bound at " + std::to_string(j));
      }
      if (!cert.free.empty()) {
        // the unclipped value must not fall below the bound
        if (s * std::exp(z[k] - zmax) < ((*u)[k] - tol) * zfree) {
          fail("clipped coordinate would not reach its bound at " + std::to_string(j));
        }
      }
    }
  }
  return out;
}

}  // namespace scattn::oracles
