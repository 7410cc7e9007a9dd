#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "scattn/qk_solver.hpp"
#include "scattn/types.hpp"

namespace scattn {

/// Absolute slack used when reading the active-set partition off solver
/// output.
inline constexpr double kSetClassifyTol = 1e-12;

/// Forward weights plus the active-set certificate consumed by the sublinear
/// backward passes.
struct TransformResult {
  Vec weights;
  ProjectionCertificate cert;
};

/// Gradients w.r.t. scores and bounds. `degenerate` marks a fully saturated
/// solution (empty free set), where the closed-form mean is undefined and the
/// documented fallback below is returned instead.
struct BoundedGrad {
  Vec dz;
  Vec du;
  bool degenerate = false;
};

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

inline Vec softmax_forward(const Vec& z) {
  check_scores(z);
  Vec out(z.size());
  const double zmax = *std::max_element(z.begin(), z.end());
  double norm = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[j] = std::exp(z[j] - zmax);
    norm += out[j];
  }
  for (double& v : out) v /= norm;
  return out;
}

/// dz_j = alpha_j * (dalpha_j - <alpha, dalpha>).
inline Vec softmax_backward(const Vec& weights, const Vec& dweights) {
  if (weights.size() != dweights.size()) {
    throw LengthMismatch("softmax_backward: size mismatch");
  }
  double inner = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) inner += weights[j] * dweights[j];
  Vec dz(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    dz[j] = weights[j] * (dweights[j] - inner);
  }
  return dz;
}

// ---------------------------------------------------------------------------
// sparsemax: Euclidean projection onto the probability simplex
// ---------------------------------------------------------------------------

inline TransformResult sparsemax_forward(const Vec& z) {
  check_scores(z);
  const std::size_t n = z.size();

  // The projection is shift invariant, so work on max-subtracted scores.
  const double zmax = *std::max_element(z.begin(), z.end());
  Vec sorted(n);
  for (std::size_t j = 0; j < n; ++j) sorted[j] = z[j] - zmax;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double cum = 0.0;
  double cum_support = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += sorted[k];
    if (1.0 + static_cast<double>(k + 1) * sorted[k] > cum) {
      support = k + 1;
      cum_support = cum;
    }
  }

  TransformResult r;
  r.weights.assign(n, 0.0);
  r.cert.free.reserve(support);
  const double ksup = static_cast<double>(support);
  for (std::size_t j = 0; j < n; ++j) {
    // Same predicate the scan used, so the classification cannot disagree
    // with the support count.
    if (1.0 + ksup * (z[j] - zmax) > cum_support) {
      r.cert.free.push_back(static_cast<int>(j));
    } else {
      r.cert.zero.push_back(static_cast<int>(j));
    }
  }

  // Threshold on the original scale, from the identified support.
  double zsum = 0.0;
  for (int j : r.cert.free) zsum += z[static_cast<std::size_t>(j)];
  const double tau = (zsum - 1.0) / static_cast<double>(r.cert.free.size());
  r.cert.tau = tau;
  for (int j : r.cert.free) {
    r.weights[static_cast<std::size_t>(j)] = std::max(0.0, z[static_cast<std::size_t>(j)] - tau);
  }
  return r;
}

/// dz_j = 1(j in free) * (dalpha_j - mean of dalpha over the free set).
inline Vec sparsemax_backward(const ProjectionCertificate& cert, const Vec& dweights) {
  Vec dz(dweights.size(), 0.0);
  if (cert.free.empty()) return dz;
  double m = 0.0;
  for (int j : cert.free) m += dweights[static_cast<std::size_t>(j)];
  m /= static_cast<double>(cert.free.size());
  for (int j : cert.free) {
    dz[static_cast<std::size_t>(j)] = dweights[static_cast<std::size_t>(j)] - m;
  }
  return dz;
}

// ---------------------------------------------------------------------------
// csoftmax: KL projection of softmax(z) under elementwise upper bounds
// ---------------------------------------------------------------------------

/// Solution form: alpha_j = min(u_j, s * e^{z_j} / Z) where Z sums e^{z_j}
/// over the unclipped set and s is the mass left after the clipped bounds.
/// Coordinates clip in decreasing order of e^{z_j}/u_j, so one sorted greedy
/// pass finds the clipped set.
inline TransformResult csoftmax_forward(const Vec& z, const Vec& u) {
  check_scores(z);
  check_bounds(u, z.size());
  check_bound_feasibility(u);
  const std::size_t n = z.size();

  const double zmax = *std::max_element(z.begin(), z.end());
  Vec w(n);
  double wsum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    // exp underflow guard: keep weights positive so ratios stay ordered
    w[j] = std::max(std::exp(z[j] - zmax), std::numeric_limits<double>::min());
    wsum += w[j];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = w[a] / u[a];  // u == 0 -> +inf, u == inf -> 0
    const double rb = w[b] / u[b];
    if (ra != rb) return ra > rb;
    return a < b;
  });

  TransformResult r;
  r.weights.assign(n, 0.0);
  std::vector<char> is_clipped(n, 0);
  double s = 1.0;
  double zfree = wsum;
  for (std::size_t idx : order) {
    if (u[idx] == kInf) break;  // ratio 0; nothing below can clip either
    // Clip while the free-scale value would exceed the bound (ties clip).
    if (s * w[idx] >= u[idx] * zfree) {
      r.weights[idx] = u[idx];
      s -= u[idx];
      zfree -= w[idx];
      is_clipped[idx] = 1;
      r.cert.clipped.push_back(static_cast<int>(idx));
    } else {
      break;
    }
  }
  s = std::max(s, 0.0);
  // Re-sum the free weights directly; the running difference above can cancel
  // to zero when the free weights are many orders below the clipped ones.
  zfree = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!is_clipped[j]) zfree += w[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!is_clipped[j]) {
      r.weights[j] = s * w[j] / zfree;
      r.cert.free.push_back(static_cast<int>(j));
    }
  }
  std::sort(r.cert.clipped.begin(), r.cert.clipped.end());
  r.cert.tau = s;
  return r;
}

/// Jacobian-vector product of the clipped-exponential form. With m the
/// alpha-weighted mean of dalpha over the free set (normalized by s):
///   dz_j = 1(free) * alpha_j * (dalpha_j - m)
///   du_j = 1(clipped) * (dalpha_j - m)
inline BoundedGrad csoftmax_backward(const ProjectionCertificate& cert,
                                     const Vec& weights, const Vec& dweights) {
  if (weights.size() != dweights.size()) {
    throw LengthMismatch("csoftmax_backward: size mismatch");
  }
  BoundedGrad g;
  g.dz.assign(weights.size(), 0.0);
  g.du.assign(weights.size(), 0.0);
  const double s = cert.tau;
  if (cert.free.empty() || s <= 0.0) {
    // Fully saturated: alpha == u exactly. dz vanishes; du passes through.
    for (int j : cert.clipped) {
      g.du[static_cast<std::size_t>(j)] = dweights[static_cast<std::size_t>(j)];
    }
    g.degenerate = true;
    return g;
  }
  double inner = 0.0;
  for (int j : cert.free) {
    inner += weights[static_cast<std::size_t>(j)] * dweights[static_cast<std::size_t>(j)];
  }
  const double m = inner / s;
  for (int j : cert.free) {
    const auto k = static_cast<std::size_t>(j);
    g.dz[k] = weights[k] * (dweights[k] - m);
  }
  for (int j : cert.clipped) {
    const auto k = static_cast<std::size_t>(j);
    g.du[k] = dweights[k] - m;
  }
  return g;
}

// ---------------------------------------------------------------------------
// csparsemax: Euclidean projection onto the simplex intersected with [0, u]
// ---------------------------------------------------------------------------

/// Solved through the knapsack reduction; the solution has the clamp form
/// alpha_j = max(0, min(u_j, z_j - tau)). The returned tau is recomputed from
/// the identified partition so the certificate identities hold to roundoff.
inline TransformResult csparsemax_forward(const Vec& z, const Vec& u,
                                          const QkOptions& opt = {}) {
  check_scores(z);
  check_bounds(u, z.size());
  check_bound_feasibility(u);
  const std::size_t n = z.size();

  const QkSolution sol = solve_qk(map_csparsemax(z, u), opt);
  const double tau0 = -2.0 * sol.level;

  TransformResult r;
  r.weights.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = z[j] - tau0;
    if (v <= kSetClassifyTol) {
      r.cert.zero.push_back(static_cast<int>(j));
    } else if (v >= u[j] - kSetClassifyTol) {
      r.cert.clipped.push_back(static_cast<int>(j));
    } else {
      r.cert.free.push_back(static_cast<int>(j));
    }
  }

  double tau = tau0;
  if (!r.cert.free.empty()) {
    double acc = -1.0;
    for (int j : r.cert.free) acc += z[static_cast<std::size_t>(j)];
    for (int j : r.cert.clipped) acc += u[static_cast<std::size_t>(j)];
    tau = acc / static_cast<double>(r.cert.free.size());
  }
  r.cert.tau = tau;

  for (int j : r.cert.clipped) {
    r.weights[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j)];
  }
  for (int j : r.cert.free) {
    const auto k = static_cast<std::size_t>(j);
    r.weights[k] = std::clamp(z[k] - tau, 0.0, u[k]);
  }
  return r;
}

/// Sublinear backward: with m the plain mean of dalpha over the free set,
///   dz_j = 1(free) * (dalpha_j - m)
///   du_j = 1(clipped) * (dalpha_j - m)
/// An empty free set has no defined m; the fallback returns dz = 0 and passes
/// dalpha through on the clipped set, with the degenerate flag raised.
inline BoundedGrad csparsemax_backward(const ProjectionCertificate& cert,
                                       const Vec& dweights) {
  BoundedGrad g;
  g.dz.assign(dweights.size(), 0.0);
  g.du.assign(dweights.size(), 0.0);
  if (cert.free.empty()) {
    for (int j : cert.clipped) {
      g.du[static_cast<std::size_t>(j)] = dweights[static_cast<std::size_t>(j)];
    }
    g.degenerate = true;
    return g;
  }
  double m = 0.0;
  for (int j : cert.free) m += dweights[static_cast<std::size_t>(j)];
  m /= static_cast<double>(cert.free.size());
  for (int j : cert.free) {
    g.dz[static_cast<std::size_t>(j)] = dweights[static_cast<std::size_t>(j)] - m;
  }
  for (int j : cert.clipped) {
    g.du[static_cast<std::size_t>(j)] = dweights[static_cast<std::size_t>(j)] - m;
  }
  return g;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

/// Weights-only entry point. Bounds are required for the constrained
/// transforms and ignored by the unconstrained ones.
inline Vec apply_transform(Transform t, const Vec& z, const Vec* u = nullptr) {
  switch (t) {
    case Transform::softmax:
      return softmax_forward(z);
    case Transform::sparsemax:
      return sparsemax_forward(z).weights;
    case Transform::csoftmax:
      if (!u) throw std::invalid_argument("csoftmax requires bounds");
      return csoftmax_forward(z, *u).weights;
    case Transform::csparsemax:
      if (!u) throw std::invalid_argument("csparsemax requires bounds");
      return csparsemax_forward(z, *u).weights;
  }
  throw std::invalid_argument("apply_transform: bad transform");
}

}  // namespace scattn
