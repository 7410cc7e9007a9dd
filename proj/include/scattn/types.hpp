#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace scattn {

using Vec = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Attention transformations selectable at run time.
enum class Transform { softmax, sparsemax, csoftmax, csparsemax };

inline const char* transform_name(Transform t) {
  switch (t) {
    case Transform::softmax: return "softmax";
    case Transform::sparsemax: return "sparsemax";
    case Transform::csoftmax: return "csoftmax";
    case Transform::csparsemax: return "csparsemax";
  }
  return "?";
}

inline Transform transform_from_name(const std::string& name) {
  if (name == "softmax") return Transform::softmax;
  if (name == "sparsemax") return Transform::sparsemax;
  if (name == "csoftmax") return Transform::csoftmax;
  if (name == "csparsemax") return Transform::csparsemax;
  throw std::invalid_argument("unknown transform: " + name);
}

/// True for the transforms that consume upper bounds.
inline bool is_constrained(Transform t) {
  return t == Transform::csoftmax || t == Transform::csparsemax;
}

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes, so keep them distinct.
// ---------------------------------------------------------------------------

/// Bounds admit no distribution: sum(u) < 1.
struct InfeasibleBounds : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Knapsack budget outside [sum(w*lower), sum(w*upper)].
struct InfeasibleBudget : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Solver finished with no free coordinate but a budget that does not match
/// the pinned sum.
struct DegenerateWeights : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingTable : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SentenceCountMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct EmptyReference : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Exhaustive KKT search found no consistent partition; signals a bug or an
/// infeasible instance.
struct NoFeasiblePartition : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Could not find a point whose active set survives +-h probes.
struct UnstableActiveSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared small types
// ---------------------------------------------------------------------------

/// Active-set partition attached to a projection output. Indices are 0-based
/// and sorted ascending. `tau` is the normalization threshold; for csoftmax it
/// instead carries the free probability mass s = 1 - sum of clipped bounds.
struct ProjectionCertificate {
  double tau = 0.0;
  std::vector<int> free;     // 0 < alpha_j < u_j
  std::vector<int> zero;     // alpha_j = 0
  std::vector<int> clipped;  // alpha_j = u_j
};

inline void check_scores(const Vec& z) {
  if (z.empty()) throw std::invalid_argument("scores: need at least one entry");
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument("scores: entries must be finite");
  }
}

inline void check_bounds(const Vec& u, std::size_t n) {
  if (u.size() != n) throw LengthMismatch("bounds: length does not match scores");
  for (double v : u) {
    if (std::isnan(v) || v < 0.0) {
      throw std::invalid_argument("bounds: entries must be >= 0 (inf allowed)");
    }
  }
}

/// Throws InfeasibleBounds unless sum(u) >= 1; any infinite entry qualifies.
inline void check_bound_feasibility(const Vec& u) {
  double total = 0.0;
  for (double v : u) {
    if (v == kInf) return;
    total += v;
  }
  if (total < 1.0) {
    throw InfeasibleBounds("infeasible bounds: sum(u) = " + std::to_string(total) +
                           " < 1");
  }
}

/// Neumaier compensated accumulator.
struct StableSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }
};

}  // namespace scattn
