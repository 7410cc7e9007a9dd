// Acceptance suite: one line per criterion, nonzero exit on any failure.
// argv[1] must point at the installed CLI binary (used by the determinism
// check).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "scattn/coverage_metrics.hpp"
#include "scattn/gradcheck.hpp"
#include "scattn/oracles.hpp"
#include "scattn/qk_solver.hpp"
#include "scattn/session.hpp"
#include "scattn/simplex_transforms.hpp"

using namespace scattn;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

struct CmdResult {
  int status = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult r;
  FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

// --------------------------------------------------------------------------
// criteria
// --------------------------------------------------------------------------

Outcome forward_oracle_equivalence(double time_limit) {
  Outcome out;
  const double t0 = now_seconds();
  const auto sparse = oracles::run_forward_suite(Transform::csparsemax, 1000, 8,
                                                 20240801, 1e-8);
  const auto soft = oracles::run_forward_suite(Transform::csoftmax, 1000, 8,
                                               20240802, 1e-8);
  const double elapsed = now_seconds() - t0;
  if (!sparse.pass()) {
    out.fail("csparsemax: " + std::to_string(sparse.failures.size()) +
             " failures, max err " + fmt(sparse.max_abs_error));
  }
  if (!soft.pass()) {
    out.fail("csoftmax: " + std::to_string(soft.failures.size()) +
             " failures, max err " + fmt(soft.max_abs_error));
  }
  if (elapsed > time_limit) {
    out.fail("runtime " + fmt(elapsed) + "s exceeds " + fmt(time_limit) + "s");
  }
  out.detail += (out.detail.empty() ? "" : "; ");
  out.detail += "max err " + fmt(sparse.max_abs_error) + " / " +
                fmt(soft.max_abs_error) + " over " +
                std::to_string(sparse.instances + soft.instances) + " instances";
  return out;
}

Outcome gradient_correctness(double time_limit) {
  Outcome out;
  const double t0 = now_seconds();
  double worst = 0.0;
  for (const Transform t : {Transform::softmax, Transform::sparsemax,
                            Transform::csoftmax, Transform::csparsemax}) {
    const auto rep = oracles::run_gradient_suite(t, 200, 8, 555000 + static_cast<int>(t),
                                                 1e-6, 1e-5);
    worst = std::max(worst, rep.max_abs_error);
    if (rep.instances != 200) {
      out.fail(std::string(transform_name(t)) + ": only " +
               std::to_string(rep.instances) + " stable points");
    }
    if (!rep.pass()) {
      out.fail(std::string(transform_name(t)) + ": max err " +
               fmt(rep.max_abs_error));
    }
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed > time_limit) {
    out.fail("runtime " + fmt(elapsed) + "s exceeds " + fmt(time_limit) + "s");
  }
  out.detail += (out.detail.empty() ? "" : "; ");
  out.detail += "max err " + fmt(worst) + " across 4x200 points";
  return out;
}

Outcome reduction_identities() {
  Outcome out;
  const auto sparse =
      oracles::run_reduction_suite(Transform::csparsemax, 1000, 10, 31001, 1e-12);
  const auto soft =
      oracles::run_reduction_suite(Transform::csoftmax, 1000, 10, 31002, 1e-12);
  if (!sparse.pass()) out.fail("csparsemax vs sparsemax: " + fmt(sparse.max_abs_error));
  if (!soft.pass()) out.fail("csoftmax vs softmax: " + fmt(soft.max_abs_error));
  out.detail += (out.detail.empty() ? "" : "; ");
  out.detail += "max err " + fmt(std::max(sparse.max_abs_error, soft.max_abs_error)) +
                " over 2000 instances";
  return out;
}

Outcome kkt_certificates() {
  Outcome out;
  oracles::InstanceGen gen(808808);
  long violations = 0;
  long checked = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int k = 0; k < 1000; ++k) {
      const Vec z = gen.scores(static_cast<std::size_t>(n));
      const Vec u = gen.bounds(static_cast<std::size_t>(n), gen.coin());

      const auto sp = sparsemax_forward(z);
      const auto csp = csparsemax_forward(z, u);
      const auto cso = csoftmax_forward(z, u);
      checked += 3;
      if (!oracles::validate_certificate(Transform::sparsemax, z, nullptr,
                                         sp.weights, sp.cert)
               .ok()) {
        ++violations;
      }
      if (!oracles::validate_certificate(Transform::csparsemax, z, &u,
                                         csp.weights, csp.cert)
               .ok()) {
        ++violations;
      }
      if (!oracles::validate_certificate(Transform::csoftmax, z, &u, cso.weights,
                                         cso.cert)
               .ok()) {
        ++violations;
      }
    }
  }
  if (violations != 0) {
    out.fail(std::to_string(violations) + " certificate violations");
  }
  out.detail += std::to_string(checked) + " certificates, " +
                std::to_string(violations) + " violations";
  return out;
}

Outcome unit_fertility_session() {
  Outcome out;

  const Vec z{1.2, 0.8, -0.2};
  const auto sp = sparsemax_forward(z);
  const Vec expected{0.7, 0.3, 0.0};
  if (max_abs_diff(sp.weights, expected) > 1e-9) {
    out.fail("plain projection of (1.2, 0.8, -0.2) off by " +
             fmt(max_abs_diff(sp.weights, expected)));
  }
  if (max_abs_diff(oracles::oracle_csparsemax(z, {kInf, kInf, kInf}), expected) >
      1e-9) {
    out.fail("oracle disagrees on the unbounded projection");
  }

  // unit fertilities, repeated steps: cumulative attention approaches the
  // bounds and never exceeds them
  SessionState st = make_session({1.0, 1.0, 1.0, kInf}, Transform::csparsemax);
  double worst_excess = 0.0;
  for (int step = 0; step < 10; ++step) {
    (void)session_step(st, {1.2, 0.8, -0.2, 0.0});
    for (int j = 0; j < 3; ++j) {
      worst_excess = std::max(
          worst_excess, st.cumulative[static_cast<std::size_t>(j)] - 1.0);
      if (st.cumulative[static_cast<std::size_t>(j)] > 1.0 + 1e-6) {
        out.fail("cumulative attention exceeded a unit fertility at step " +
                 std::to_string(step + 1));
      }
    }
  }
  for (int j = 0; j < 3; ++j) {
    if (std::fabs(st.cumulative[static_cast<std::size_t>(j)] - 1.0) > 1e-6) {
      out.fail("word " + std::to_string(j) + " did not reach its fertility");
    }
  }
  out.detail += "worst bound excess " + fmt(worst_excess);
  return out;
}

Outcome session_credit_law() {
  Outcome out;
  oracles::InstanceGen gen(116611);

  // randomized sweep
  for (const Transform t : {Transform::csoftmax, Transform::csparsemax}) {
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t words = 1 + gen.below(10);
      const int steps = 1 + static_cast<int>(gen.below(50));
      Vec fert(words + 1);
      for (std::size_t j = 0; j < words; ++j) fert[j] = gen.uniform(0.3, 1.5);
      fert.back() = kInf;
      std::vector<Vec> scores;
      for (int k = 0; k < steps; ++k) scores.push_back(gen.scores(words + 1));
      const double bonus = gen.coin() ? 0.2 : 0.0;
      const SessionTrace trace = run_session(fert, scores, t, bonus);

      Vec colsum(words + 1, 0.0);
      bool exhausted = false;
      for (const auto& row : trace.weights) {
        double rs = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
          rs += row[j];
          colsum[j] += row[j];
        }
        if (std::fabs(rs - 1.0) > 1e-9) out.fail("row sum off by " + fmt(rs - 1.0));
        if (exhausted && row.back() < 1.0 - 1e-6) {
          out.fail("sink mass below 1 after exhaustion");
        }
        exhausted = true;
        for (std::size_t j = 0; j < words; ++j) {
          if (colsum[j] < fert[j] - 1e-9) exhausted = false;
        }
      }
      for (std::size_t j = 0; j < words; ++j) {
        if (colsum[j] > fert[j] + 1e-6) {
          out.fail("credit exceeded at word " + std::to_string(j));
        }
      }
    }
  }

  // engineered exhaustion: all non-sink credit must drain, then the sink
  // takes everything
  const Vec fert{1.3, 0.9, kInf};
  SessionState st = make_session(fert, Transform::csparsemax, 0.4);
  int exhausted_at = -1;
  for (int step = 0; step < 8; ++step) {
    const Vec row = session_step(st, {1.2, 0.8, -1.5});
    const bool all_done = st.cumulative[0] >= fert[0] - 1e-9 &&
                          st.cumulative[1] >= fert[1] - 1e-9;
    if (exhausted_at < 0 && all_done) exhausted_at = step;
    if (exhausted_at >= 0 && step > exhausted_at && row.back() < 1.0 - 1e-6) {
      out.fail("engineered run: sink mass " + fmt(row.back()) + " at step " +
               std::to_string(step + 1));
    }
  }
  if (exhausted_at < 0 || exhausted_at > 5) {
    out.fail("engineered run never exhausted its credit");
  } else {
    out.detail += "exhausted at step " + std::to_string(exhausted_at + 1);
  }
  return out;
}

Outcome solver_complexity() {
  Outcome out;

  // agreement with the sort-based reference on 10 000 instances
  oracles::InstanceGen gen(654321);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + gen.below(64);
    QkProblem p;
    p.lower.resize(n);
    p.upper.resize(n);
    p.weight.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      p.lower[j] = gen.uniform(-3.0, 3.0);
      p.upper[j] = p.lower[j] + gen.uniform(0.0, 2.0);
      p.weight[j] = gen.uniform(0.05, 2.0);
    }
    const double level = gen.uniform(-4.0, 4.0);
    p.budget = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p.budget += p.weight[j] * std::clamp(level, p.lower[j], p.upper[j]);
    }
    worst = std::max(
        worst, max_abs_diff(solve_qk(p).x, oracles::solve_qk_by_sort(p).x));
  }
  if (worst > 1e-9) out.fail("reference disagreement " + fmt(worst));

  // wall-time growth over three decades of problem size
  const std::vector<std::size_t> sizes{1000, 10000, 100000, 1000000};
  const std::vector<int> reps{30, 12, 5, 3};
  std::vector<double> seconds;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const std::size_t n = sizes[si];
    QkProblem p;
    p.lower.resize(n);
    p.upper.resize(n);
    p.weight.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      p.lower[j] = gen.uniform(-2.0, 0.0);
      p.upper[j] = p.lower[j] + gen.uniform(0.1, 2.0);
      p.weight[j] = gen.uniform(0.1, 1.0);
    }
    const double level = gen.uniform(-2.0, 2.0);
    p.budget = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p.budget += p.weight[j] * std::clamp(level, p.lower[j], p.upper[j]);
    }
    std::vector<double> times;
    for (int r = 0; r < reps[si]; ++r) {
      const double t0 = now_seconds();
      const QkSolution s = solve_qk(p);
      const double t1 = now_seconds();
      if (s.x.size() != n) out.fail("bad solution size");
      times.push_back(t1 - t0);
    }
    std::sort(times.begin(), times.end());
    seconds.push_back(times[times.size() / 2]);
  }

  // least-squares fit seconds ~ a + b * n
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = static_cast<double>(sizes[i]);
    sx += x;
    sy += seconds[i];
    sxx += x * x;
    sxy += x * seconds[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = static_cast<double>(sizes[i]);
    const double pred = intercept + slope * x;
    ss_res += (seconds[i] - pred) * (seconds[i] - pred);
    ss_tot += (seconds[i] - sy / m) * (seconds[i] - sy / m);
  }
  const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (r2 < 0.99) out.fail("linear time fit R^2 = " + fmt(r2));
  out.detail += "R^2 " + fmt(r2) + ", ref err " + fmt(worst) + ", t(1e6) " +
                fmt(seconds.back()) + "s";
  return out;
}

Outcome metric_exactness() {
  Outcome out;
  auto format2 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  Corpus hyp, ref;
  hyp.sentences = {{"the", "the", "cat", "sat"}};
  hyp.token_count = 4;
  ref.sentences = {{"the", "cat", "sat"}};
  ref.token_count = 3;
  if (format2(rep_score(hyp, ref)) != "66.67") {
    out.fail("repetition example printed as " + format2(rep_score(hyp, ref)));
  }
  if (format2(rep_score(ref, ref)) != "0.00") {
    out.fail("identical corpora repetition not 0.00");
  }

  Corpus src;
  src.sentences = {{"w1", "w2", "w3"}};
  src.token_count = 3;
  AlignmentSet ra, ha;
  ra.sentences = {{{0, 0}, {1, 1}}};
  ha.sentences = {{{0, 0}}};
  if (format2(drop_score(src, ra, ha)) != "33.33") {
    out.fail("drop example printed as " + format2(drop_score(src, ra, ha)));
  }
  if (format2(drop_score(src, ra, ra)) != "0.00") {
    out.fail("identical alignments drop not 0.00");
  }

  const double cp = coverage_penalty(
      {{1.0, 0.0, 0.0}, {0.0, 0.5, 0.5}, {0.0, 0.0, 1.0}}, 0.2);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", cp);
  if (std::string(buf) != "-0.1386") {
    out.fail(std::string("coverage penalty printed as ") + buf);
  }
  out.detail += "66.67 / 33.33 / -0.1386 reproduced";
  return out;
}

Outcome gradcheck_determinism(const char* cli) {
  Outcome out;
  if (!cli) {
    out.fail("no CLI path given (argv[1])");
    return out;
  }
  const std::string cmd = std::string(cli) + " gradcheck --seed 42";
  const CmdResult a = run_cmd(cmd);
  const CmdResult b = run_cmd(cmd);
  if (a.status != 0) out.fail("first run exited " + std::to_string(a.status));
  if (b.status != 0) out.fail("second run exited " + std::to_string(b.status));
  if (a.out != b.out) out.fail("reports differ between runs");
  if (a.out.empty()) out.fail("empty report");
  out.detail += std::to_string(a.out.size()) + " bytes, byte-identical";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const char* cli = argc > 1 ? argv[1] : nullptr;
  int failures = 0;

  struct Row {
    int id;
    const char* name;
    Outcome outcome;
    double seconds;
  };
  std::vector<Row> rows;

  auto run = [&](int id, const char* name, auto&& fn) {
    const double t0 = now_seconds();
    Outcome o = fn();
    const double dt = now_seconds() - t0;
    rows.push_back({id, name, o, dt});
    std::printf("criterion %d [%s] %s — %s (%.1fs)\n", id,
                o.pass ? "PASS" : "FAIL", name,
                o.detail.empty() ? "-" : o.detail.c_str(), dt);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  run(1, "forward oracle equivalence", [] { return forward_oracle_equivalence(60.0); });
  run(2, "gradient correctness", [] { return gradient_correctness(30.0); });
  run(3, "reduction identities", [] { return reduction_identities(); });
  run(4, "KKT certificates", [] { return kkt_certificates(); });
  run(5, "unit-fertility session", [] { return unit_fertility_session(); });
  run(6, "session credit law", [] { return session_credit_law(); });
  run(7, "solver complexity", [] { return solver_complexity(); });
  run(8, "metric exactness", [] { return metric_exactness(); });
  run(9, "gradcheck determinism", [&] { return gradcheck_determinism(cli); });

  std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failures,
              rows.size());
  return failures == 0 ? 0 : 1;
}
