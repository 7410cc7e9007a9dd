#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "scattn/oracles.hpp"
#include "scattn/simplex_transforms.hpp"
#include "scattn/types.hpp"

// Finite-difference Jacobian verification and the seeded random suites used
// by the gradcheck command and the acceptance checks.

namespace scattn::oracles {

// ---------------------------------------------------------------------------
// Central-difference Jacobian check
// ---------------------------------------------------------------------------

struct FdResult {
  bool stable = true;  // active set identical under every +-h probe
  double max_err_scores = 0.0;
  double max_err_bounds = 0.0;
  // worst single entry, kept for failure reports
  std::string worst_entry;
  double worst_numeric = 0.0;
  double worst_backward = 0.0;

  double max_err() const { return std::max(max_err_scores, max_err_bounds); }
};

namespace detail {

struct ForwardEval {
  Vec weights;
  std::vector<int> labels;  // 0 zero, 1 free, 2 clipped
  ProjectionCertificate cert;
};

inline ForwardEval eval_forward(Transform t, const Vec& z, const Vec* u) {
  ForwardEval e;
  switch (t) {
    case Transform::softmax:
      e.weights = softmax_forward(z);
      e.labels.assign(z.size(), 1);
      return e;
    case Transform::sparsemax: {
      auto r = sparsemax_forward(z);
      e.weights = std::move(r.weights);
      e.cert = std::move(r.cert);
      break;
    }
    case Transform::csoftmax: {
      auto r = csoftmax_forward(z, *u);
      e.weights = std::move(r.weights);
      e.cert = std::move(r.cert);
      break;
    }
    case Transform::csparsemax: {
      auto r = csparsemax_forward(z, *u);
      e.weights = std::move(r.weights);
      e.cert = std::move(r.cert);
      break;
    }
  }
  e.labels.assign(z.size(), 1);
  for (int j : e.cert.zero) e.labels[static_cast<std::size_t>(j)] = 0;
  for (int j : e.cert.clipped) e.labels[static_cast<std::size_t>(j)] = 2;
  return e;
}

}  // namespace detail

/// Builds the full Jacobian twice -- central differences of the forward map
/// against rows produced by the backward pass on basis cotangents -- and
/// reports the largest discrepancy. Points whose active set changes under any
/// probe are flagged unstable instead; the forward map is not differentiable
/// there and callers resample.
inline FdResult finite_diff_check(Transform t, const Vec& z, const Vec* u,
                                  double h = 1e-6) {
  FdResult res;
  const std::size_t n = z.size();
  const bool constrained = is_constrained(t);

  const auto base = detail::eval_forward(t, z, u);
  if (constrained && base.cert.free.empty()) {
    res.stable = false;  // saturated solutions have no defined Jacobian
    return res;
  }

  auto probe = [&](const Vec& zz, const Vec* uu, Vec& out) {
    try {
      const auto e = detail::eval_forward(t, zz, uu);
      if (e.labels != base.labels) return false;
      out = e.weights;
      return true;
    } catch (const InfeasibleBounds&) {
      return false;
    }
  };

  // numeric[i][j] = d alpha_i / d z_j
  std::vector<Vec> num_z(n, Vec(n, 0.0));
  Vec plus, minus;
  for (std::size_t j = 0; j < n; ++j) {
    Vec zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    if (!probe(zp, u, plus) || !probe(zm, u, minus)) {
      res.stable = false;
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) {
      num_z[i][j] = (plus[i] - minus[i]) / (2.0 * h);
    }
  }

  std::vector<Vec> num_u;
  std::vector<char> u_probed(n, 0);
  if (constrained) {
    num_u.assign(n, Vec(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      if ((*u)[j] == kInf) continue;  // no useful derivative direction
      if ((*u)[j] <= 2.0 * h) {
        res.stable = false;  // probe would cross the u >= 0 boundary
        return res;
      }
      Vec up = *u, um = *u;
      up[j] += h;
      um[j] -= h;
      if (!probe(z, &up, plus) || !probe(z, &um, minus)) {
        res.stable = false;
        return res;
      }
      u_probed[j] = 1;
      for (std::size_t i = 0; i < n; ++i) {
        num_u[i][j] = (plus[i] - minus[i]) / (2.0 * h);
      }
    }
  }

  // backward rows on basis cotangents
  Vec cotangent(n, 0.0);
  auto record = [&](double got, double want, const char* kind, std::size_t i,
                    std::size_t j, double& slot) {
    const double err = std::fabs(got - want);
    if (err > slot) slot = err;
    if (err >= std::max(res.max_err_scores, res.max_err_bounds)) {
      res.worst_entry = std::string(kind) + "[" + std::to_string(i) + "][" +
                        std::to_string(j) + "]";
      res.worst_numeric = want;
      res.worst_backward = got;
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    cotangent.assign(n, 0.0);
    cotangent[i] = 1.0;
    Vec dz;
    Vec du;
    switch (t) {
      case Transform::softmax:
        dz = softmax_backward(base.weights, cotangent);
        break;
      case Transform::sparsemax:
        dz = sparsemax_backward(base.cert, cotangent);
        break;
      case Transform::csoftmax: {
        auto g = csoftmax_backward(base.cert, base.weights, cotangent);
        dz = std::move(g.dz);
        du = std::move(g.du);
        break;
      }
      case Transform::csparsemax: {
        auto g = csparsemax_backward(base.cert, cotangent);
        dz = std::move(g.dz);
        du = std::move(g.du);
        break;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      record(dz[j], num_z[i][j], "dz", i, j, res.max_err_scores);
    }
    if (constrained) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!u_probed[j]) continue;
        record(du[j], num_u[i][j], "du", i, j, res.max_err_bounds);
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Seeded instance generation
// ---------------------------------------------------------------------------

/// Deterministic generator for the random suites: scores uniform on [-2, 2],
/// bounds uniform on [0.1, 1.5] with an unbounded sink in half the instances.
/// Bound vectors are redrawn until feasible with the requested margin.
struct InstanceGen {
  std::mt19937_64 eng;

  explicit InstanceGen(std::uint64_t seed) : eng(seed) {}

  double unit() {  // [0, 1), engine-portable
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool coin() { return (eng() & 1ull) != 0; }
  std::uint64_t below(std::uint64_t m) { return eng() % m; }

  Vec scores(std::size_t n) {
    Vec z(n);
    for (auto& v : z) v = uniform(-2.0, 2.0);
    return z;
  }

  Vec bounds(std::size_t n, bool with_sink, double margin = 0.0) {
    Vec u(n);
    while (true) {
      double total = 0.0;
      for (auto& v : u) {
        v = uniform(0.1, 1.5);
        total += v;
      }
      if (with_sink) {
        u.back() = kInf;
        return u;
      }
      if (total >= 1.0 + margin) return u;
    }
  }

  Vec cotangent(std::size_t n) {
    Vec d(n);
    for (auto& v : d) v = uniform(-1.0, 1.0);
    return d;
  }
};

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

struct OracleFailure {
  std::string check;
  Vec z;
  Vec u;  // empty when the check has no bounds
  Vec expected;
  Vec got;
  double error = 0.0;
};

struct OracleReport {
  int instances = 0;
  double max_abs_error = 0.0;
  double tolerance = 0.0;
  std::vector<OracleFailure> failures;

  bool pass() const { return failures.empty(); }
};

namespace detail {

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    m = std::max(m, std::fabs(a[j] - b[j]));
  }
  return m;
}

}  // namespace detail

/// Compares the fast forward paths against the exhaustive oracles on
/// `trials_per_size` instances for every size 1..max_size, and validates each
/// certificate. softmax and sparsemax are exercised through their
/// unbounded-reduction oracles.
inline OracleReport run_forward_suite(Transform t, int trials_per_size,
                                      int max_size, std::uint64_t seed,
                                      double tol = 1e-8) {
  OracleReport rep;
  rep.tolerance = tol;
  InstanceGen gen(seed);
  for (int n = 1; n <= max_size; ++n) {
    for (int k = 0; k < trials_per_size; ++k) {
      const Vec z = gen.scores(static_cast<std::size_t>(n));
      Vec u;
      Vec got;
      Vec want;
      ProjectionCertificate cert;
      const Vec* ucert = nullptr;
      switch (t) {
        case Transform::csparsemax: {
          u = gen.bounds(static_cast<std::size_t>(n), gen.coin());
          auto r = csparsemax_forward(z, u);
          got = std::move(r.weights);
          cert = std::move(r.cert);
          want = oracle_csparsemax(z, u);
          ucert = &u;
          break;
        }
        case Transform::csoftmax: {
          u = gen.bounds(static_cast<std::size_t>(n), gen.coin());
          auto r = csoftmax_forward(z, u);
          got = std::move(r.weights);
          cert = std::move(r.cert);
          want = oracle_csoftmax(z, u);
          ucert = &u;
          break;
        }
        case Transform::sparsemax: {
          u.assign(static_cast<std::size_t>(n), kInf);
          auto r = sparsemax_forward(z);
          got = std::move(r.weights);
          cert = std::move(r.cert);
          want = oracle_csparsemax(z, u);
          break;
        }
        case Transform::softmax: {
          u.assign(static_cast<std::size_t>(n), kInf);
          got = softmax_forward(z);
          want = oracle_csoftmax(z, u);
          break;
        }
      }
      ++rep.instances;
      const double err = detail::max_abs_diff(got, want);
      rep.max_abs_error = std::max(rep.max_abs_error, err);
      if (err > tol) {
        rep.failures.push_back({"forward", z, is_constrained(t) ? u : Vec{},
                                want, got, err});
      }
      if (t != Transform::softmax) {
        const auto issues = validate_certificate(t, z, ucert, got, cert);
        if (!issues.ok()) {
          rep.failures.push_back({"certificate: " + issues.problems.front(), z,
                                  is_constrained(t) ? u : Vec{}, want, got, err});
        }
      }
    }
  }
  return rep;
}

/// Central-difference gradient suite: `points` active-set-stable random
/// points per transform, resampling each point up to 100 times.
inline OracleReport run_gradient_suite(Transform t, int points, int max_size,
                                       std::uint64_t seed, double h = 1e-6,
                                       double tol = 1e-5) {
  OracleReport rep;
  rep.tolerance = tol;
  InstanceGen gen(seed);
  const bool constrained = is_constrained(t);
  for (int k = 0; k < points; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < 100 && !done; ++attempt) {
      const std::size_t n =
          2 + static_cast<std::size_t>(gen.below(static_cast<std::uint64_t>(
                  std::max(1, max_size - 1))));
      const Vec z = gen.scores(n);
      Vec u;
      const Vec* up = nullptr;
      if (constrained) {
        u = gen.bounds(n, gen.coin(), 0.05);
        up = &u;
      }
      const FdResult fd = finite_diff_check(t, z, up, h);
      if (!fd.stable) continue;
      done = true;
      ++rep.instances;
      rep.max_abs_error = std::max(rep.max_abs_error, fd.max_err());
      if (fd.max_err() > tol) {
        rep.failures.push_back({"gradient " + fd.worst_entry, z, u,
                                {fd.worst_numeric},
                                {fd.worst_backward},
                                fd.max_err()});
      }
    }
    if (!done) {
      throw UnstableActiveSet(
          "gradient suite: no stable point after 100 resamples");
    }
  }
  return rep;
}

/// Reduction identities: the constrained transforms with all-infinite bounds
/// must reproduce their unconstrained counterparts.
inline OracleReport run_reduction_suite(Transform t, int trials, int max_size,
                                        std::uint64_t seed, double tol = 1e-12) {
  if (!is_constrained(t)) {
    throw std::invalid_argument("reduction suite applies to constrained transforms");
  }
  OracleReport rep;
  rep.tolerance = tol;
  InstanceGen gen(seed);
  for (int k = 0; k < trials; ++k) {
    const std::size_t n = 1 + static_cast<std::size_t>(
                                  gen.below(static_cast<std::uint64_t>(max_size)));
    const Vec z = gen.scores(n);
    const Vec u(n, kInf);
    Vec got;
    Vec want;
    if (t == Transform::csparsemax) {
      got = csparsemax_forward(z, u).weights;
      want = sparsemax_forward(z).weights;
    } else {
      got = csoftmax_forward(z, u).weights;
      want = softmax_forward(z);
    }
    ++rep.instances;
    const double err = detail::max_abs_diff(got, want);
    rep.max_abs_error = std::max(rep.max_abs_error, err);
    if (err > tol) {
      rep.failures.push_back({"reduction", z, {}, want, got, err});
    }
  }
  return rep;
}

}  // namespace scattn::oracles
