#pragma once

#include <utility>
#include <vector>

#include "scattn/simplex_transforms.hpp"
#include "scattn/types.hpp"

namespace scattn {

/// One decoding stream. Each source word carries a fertility credit; the
/// remaining credit at step t becomes the upper-bound vector for the
/// constrained transforms. The trailing entry is the sink, whose unbounded
/// fertility keeps every step feasible no matter how long the session runs.
struct SessionState {
  Vec fertility;       // length J+1, back() == +inf
  Vec cumulative;      // running sum of emitted attention rows
  int steps = 0;
  double exhaustion_bonus = 0.0;  // score bonus per unit of remaining credit
  Transform transform = Transform::csparsemax;
};

inline SessionState make_session(Vec fertility_with_sink, Transform t,
                                 double exhaustion_bonus = 0.0) {
  if (fertility_with_sink.empty() || fertility_with_sink.back() != kInf) {
    throw std::invalid_argument("session fertility must end with the +inf sink");
  }
  for (double f : fertility_with_sink) {
    if (std::isnan(f) || f < 0.0) {
      throw std::invalid_argument("fertilities must be >= 0");
    }
  }
  if (!(exhaustion_bonus >= 0.0)) {
    throw std::invalid_argument("exhaustion bonus must be >= 0");
  }
  SessionState st;
  st.cumulative.assign(fertility_with_sink.size(), 0.0);
  st.fertility = std::move(fertility_with_sink);
  st.exhaustion_bonus = exhaustion_bonus;
  st.transform = t;
  return st;
}

/// Advances the session one step: bounds are the remaining credits
/// (clamped at zero to absorb accumulated roundoff in the running sum), the
/// bonus is added to the scores of coordinates with finite fertility, and the
/// transformed weights are folded into the cumulative attention.
inline Vec session_step(SessionState& st, const Vec& scores) {
  if (scores.size() != st.fertility.size()) {
    throw LengthMismatch("session_step: got " + std::to_string(scores.size()) +
                         " scores for " + std::to_string(st.fertility.size()) +
                         " source positions");
  }
  check_scores(scores);
  const std::size_t n = scores.size();

  Vec bounds(n);
  for (std::size_t j = 0; j < n; ++j) {
    bounds[j] = st.fertility[j] == kInf
                    ? kInf
                    : std::max(0.0, st.fertility[j] - st.cumulative[j]);
  }

  Vec weights;
  if (st.exhaustion_bonus > 0.0) {
    Vec boosted = scores;
    for (std::size_t j = 0; j < n; ++j) {
      if (st.fertility[j] != kInf) boosted[j] += st.exhaustion_bonus * bounds[j];
    }
    weights = apply_transform(st.transform, boosted, &bounds);
  } else {
    weights = apply_transform(st.transform, scores, &bounds);
  }

  for (std::size_t j = 0; j < n; ++j) st.cumulative[j] += weights[j];
  ++st.steps;
  return weights;
}

struct SessionTrace {
  std::vector<Vec> weights;  // one row per step
  Vec cumulative;            // final running sum
};

inline SessionTrace run_session(Vec fertility_with_sink,
                                const std::vector<Vec>& scores, Transform t,
                                double exhaustion_bonus = 0.0) {
  SessionState st = make_session(std::move(fertility_with_sink), t, exhaustion_bonus);
  SessionTrace trace;
  trace.weights.reserve(scores.size());
  for (const auto& z : scores) {
    trace.weights.push_back(session_step(st, z));
  }
  trace.cumulative = st.cumulative;
  return trace;
}

}  // namespace scattn
