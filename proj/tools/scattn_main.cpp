// Command-line surface for the attention transforms, fertility sessions,
// coverage metrics, and the verification suites.
//
// Exit codes: 0 ok, 1 check failure, 2 usage or parse error, 3 infeasible
// bounds/budget, 4 data mismatch (sentence counts, vector lengths).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scattn/coverage_metrics.hpp"
#include "scattn/fertility.hpp"
#include "scattn/gradcheck.hpp"
#include "scattn/jsonio.hpp"
#include "scattn/oracles.hpp"
#include "scattn/session.hpp"
#include "scattn/simplex_transforms.hpp"
#include "scattn/types.hpp"

namespace {

using namespace scattn;

std::string slurp(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Resolves a FILE|-|inline argument: "-" reads stdin, an existing path reads
/// the file, anything else is treated as inline text.
std::string fetch_text(const std::string& arg) {
  if (arg == "-") return slurp(std::cin);
  if (std::filesystem::exists(arg)) {
    std::ifstream f(arg);
    if (!f) throw ParseError("cannot open " + arg);
    return slurp(f);
  }
  return arg;
}

std::ifstream open_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  return f;
}

/// Whitespace-separated doubles; "inf" is accepted for unbounded entries.
Vec parse_number_list(const std::string& text) {
  Vec out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("not a number: '" + tok + "'");
    }
  }
  if (out.empty()) throw ParseError("empty number list");
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> toks;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) toks.push_back(tok);
  return toks;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const InfeasibleBounds& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InfeasibleBudget& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const LengthMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const SentenceCountMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const IndexOutOfRange& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const EmptyReference& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const MissingTable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string transform;
  std::string scores;
  std::string bounds;
};

int run_project(const ProjectArgs& a) {
  const Transform t = transform_from_name(a.transform);
  const Vec z = parse_number_list(fetch_text(a.scores));
  Vec u;
  if (!a.bounds.empty()) u = parse_number_list(fetch_text(a.bounds));

  if (is_constrained(t) && u.empty()) {
    std::cerr << "usage: --bounds is required with " << a.transform << "\n";
    return 2;
  }
  if (!is_constrained(t) && !u.empty()) {
    std::cerr << "warning: " << a.transform << " ignores --bounds\n";
  }

  Json out;
  out["transform"] = a.transform;
  switch (t) {
    case Transform::softmax:
      out["alpha"] = vec_to_json(softmax_forward(z));
      break;
    case Transform::sparsemax: {
      const auto r = sparsemax_forward(z);
      out["alpha"] = vec_to_json(r.weights);
      out["certificate"] = cert_to_json(r.cert);
      break;
    }
    case Transform::csoftmax: {
      const auto r = csoftmax_forward(z, u);
      out["alpha"] = vec_to_json(r.weights);
      out["certificate"] = cert_to_json(r.cert);
      break;
    }
    case Transform::csparsemax: {
      const auto r = csparsemax_forward(z, u);
      out["alpha"] = vec_to_json(r.weights);
      out["certificate"] = cert_to_json(r.cert);
      break;
    }
  }
  std::cout << out.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// session
// ---------------------------------------------------------------------------

struct SessionArgs {
  std::string transform = "csparsemax";
  std::string scores;
  std::string fertility;  // constant:F or table:FILE
  std::string src;
  double exhaustion = 0.0;
  bool fertility_given = false;
};

int run_session(const SessionArgs& a) {
  const Transform t = transform_from_name(a.transform);
  std::istringstream scores_in(fetch_text(a.scores));
  const std::vector<Vec> rows = read_score_lines(scores_in);

  if (!is_constrained(t) && a.fertility_given && a.exhaustion == 0.0) {
    std::cerr << "warning: " << a.transform
              << " does not use fertility bounds; --fertility is ignored\n";
  }

  std::string spec = a.fertility.empty() ? std::string("constant:1") : a.fertility;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);

  Vec fertility;
  if (kind == "constant") {
    if (rows.empty()) {
      std::cout << Json{{"beta", Json::array()}}.dump() << "\n";
      return 0;
    }
    if (rows.front().size() < 2) {
      throw LengthMismatch("session: score rows must cover J words plus the sink");
    }
    const std::size_t n_words = rows.front().size() - 1;
    double value = 1.0;
    if (!rest.empty()) {
      try {
        value = std::stod(rest);
      } catch (const std::exception&) {
        throw ParseError("bad fertility constant: '" + rest + "'");
      }
    }
    fertility = assign_fertilities(FertilityStrategy::constant,
                                   std::vector<std::string>(n_words), nullptr,
                                   value);
  } else if (kind == "table") {
    if (rest.empty()) throw ParseError("--fertility table: needs a file path");
    if (a.src.empty()) {
      std::cerr << "usage: --fertility table:FILE requires --src\n";
      return 2;
    }
    auto f = open_file(rest);
    const FertilityTable table = read_fertility_table(f);
    const auto tokens = split_tokens(fetch_text(a.src));
    fertility = assign_fertilities(FertilityStrategy::predicted, tokens, &table);
    if (rows.empty()) {
      std::cout << Json{{"beta", vec_to_json(Vec(fertility.size(), 0.0))}}.dump()
                << "\n";
      return 0;
    }
  } else {
    throw ParseError("bad --fertility spec (want constant:F or table:FILE): " + spec);
  }

  SessionState st = make_session(std::move(fertility), t, a.exhaustion);
  for (const auto& z : rows) {
    const Vec w = session_step(st, z);
    std::cout << vec_to_json(w).dump() << "\n";
  }
  Json beta;
  beta["beta"] = vec_to_json(st.cumulative);
  std::cout << beta.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fertility guided
// ---------------------------------------------------------------------------

struct GuidedArgs {
  std::string src;
  std::string align;
  double add = 0.0;
  std::string output = "-";
};

int run_fertility_guided(const GuidedArgs& a) {
  auto src_in = open_file(a.src);
  auto align_in = open_file(a.align);
  const Corpus corpus = read_corpus(src_in);
  const AlignmentSet alignments = read_alignments(align_in);
  const FertilityTable table = build_guided_table(corpus, alignments, a.add);
  if (a.output == "-") {
    write_fertility_table(std::cout, table);
  } else {
    std::ofstream out(a.output);
    if (!out) throw ParseError("cannot write " + a.output);
    write_fertility_table(out, table);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

struct RepArgs {
  std::string hyp, ref;
  int n = 2;
  double l1 = 1.0;
  double l2 = 2.0;
};

int run_metrics_rep(const RepArgs& a) {
  auto hyp_in = open_file(a.hyp);
  auto ref_in = open_file(a.ref);
  const double score = rep_score(read_corpus(hyp_in), read_corpus(ref_in), a.n,
                                 a.l1, a.l2);
  std::printf("%.2f\n", score);
  return 0;
}

struct DropArgs {
  std::string src, ref_align, hyp_align;
};

int run_metrics_drop(const DropArgs& a) {
  auto src_in = open_file(a.src);
  auto ref_in = open_file(a.ref_align);
  auto hyp_in = open_file(a.hyp_align);
  const double score = drop_score(read_corpus(src_in), read_alignments(ref_in),
                                  read_alignments(hyp_in));
  std::printf("%.2f\n", score);
  return 0;
}

struct CovpenArgs {
  std::string att;
  double beta = 0.0;
  double eps = 0.1;
};

int run_metrics_covpen(const CovpenArgs& a) {
  auto att_in = open_file(a.att);
  const double cp = coverage_penalty(read_attention_matrix(att_in), a.beta, a.eps);
  std::printf("%.2f\n", cp);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string transform = "csparsemax";
  int trials = 1000;
  std::uint64_t seed = 42;
  int jmax = 8;
  double h = 1e-6;
  double ftol = 1e-8;
  double gtol = 1e-5;
  double rtol = 1e-12;
};

Json report_to_json(const oracles::OracleReport& rep) {
  Json j;
  j["instances"] = rep.instances;
  j["max_abs_error"] = rep.max_abs_error;
  j["tolerance"] = rep.tolerance;
  Json fails = Json::array();
  for (const auto& f : rep.failures) {
    Json e;
    e["check"] = f.check;
    e["z"] = vec_to_json(f.z);
    if (!f.u.empty()) e["u"] = vec_to_json(f.u);
    e["expected"] = vec_to_json(f.expected);
    e["got"] = vec_to_json(f.got);
    e["error"] = f.error;
    fails.push_back(e);
  }
  j["failures"] = fails;
  return j;
}

int run_gradcheck(const GradcheckArgs& a) {
  const Transform t = transform_from_name(a.transform);
  Json out;
  out["transform"] = a.transform;
  out["trials"] = a.trials;
  out["seed"] = a.seed;
  out["jmax"] = a.jmax;

  const auto forward =
      oracles::run_forward_suite(t, a.trials, a.jmax, a.seed, a.ftol);
  const auto gradient =
      oracles::run_gradient_suite(t, a.trials, a.jmax, a.seed + 1, a.h, a.gtol);
  out["forward"] = report_to_json(forward);
  out["gradient"] = report_to_json(gradient);
  bool pass = forward.pass() && gradient.pass();
  if (is_constrained(t)) {
    const auto reduction =
        oracles::run_reduction_suite(t, a.trials, a.jmax, a.seed + 2, a.rtol);
    out["reduction"] = report_to_json(reduction);
    pass = pass && reduction.pass();
  }
  out["pass"] = pass;
  std::cout << out.dump() << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse and constrained attention toolkit"};
  app.require_subcommand(1);

  ProjectArgs project_args;
  auto* project = app.add_subcommand(
      "project", "apply one attention transformation to a score vector");
  project->add_option("--transform", project_args.transform,
                      "softmax|sparsemax|csoftmax|csparsemax")
      ->required();
  project->add_option("--scores", project_args.scores,
                      "FILE, '-' for stdin, or inline numbers")
      ->required();
  project->add_option("--bounds", project_args.bounds,
                      "upper bounds; FILE, '-', or inline (use 'inf' for unbounded)");

  SessionArgs session_args;
  auto* session = app.add_subcommand(
      "session", "run a fertility-bounded decoding session over score rows");
  session->add_option("--scores", session_args.scores,
                      "JSON-lines file ('-' for stdin), one score row per step; "
                      "each row covers J words plus the sink")
      ->required();
  session->add_option("--transform", session_args.transform,
                      "softmax|sparsemax|csoftmax|csparsemax (default csparsemax)");
  auto* fert_opt = session->add_option(
      "--fertility", session_args.fertility,
      "constant:F or table:FILE (default constant:1)");
  session->add_option("--src", session_args.src,
                      "source tokens (FILE, '-', or inline); required with table:");
  session->add_option("--exhaustion", session_args.exhaustion,
                      "score bonus per unit of remaining credit (0.2 is typical; "
                      "default 0)");

  GuidedArgs guided_args;
  auto* fertility = app.add_subcommand("fertility", "fertility table utilities");
  fertility->require_subcommand(1);
  auto* guided = fertility->add_subcommand(
      "guided", "build a fertility table from aligned training data");
  guided->add_option("--src", guided_args.src, "tokenized source corpus")->required();
  guided->add_option("--align", guided_args.align, "alignments, one line per sentence")
      ->required();
  guided->add_option("--add", guided_args.add, "constant added to every fertility");
  guided->add_option("-o,--output", guided_args.output, "output table (default stdout)");

  RepArgs rep_args;
  DropArgs drop_args;
  CovpenArgs covpen_args;
  auto* metrics = app.add_subcommand("metrics", "coverage diagnostics");
  metrics->require_subcommand(1);
  auto* rep = metrics->add_subcommand("rep", "repetition score");
  rep->add_option("--hyp", rep_args.hyp, "hypothesis corpus")->required();
  rep->add_option("--ref", rep_args.ref, "reference corpus")->required();
  rep->add_option("--n", rep_args.n, "n-gram order (default 2)");
  rep->add_option("--l1", rep_args.l1, "n-gram term weight (default 1)");
  rep->add_option("--l2", rep_args.l2, "duplicate-word term weight (default 2)");
  auto* drop = metrics->add_subcommand("drop", "dropped-source-word score");
  drop->add_option("--src", drop_args.src, "source corpus")->required();
  drop->add_option("--ref-align", drop_args.ref_align, "source-reference alignments")
      ->required();
  drop->add_option("--hyp-align", drop_args.hyp_align, "source-hypothesis alignments")
      ->required();
  auto* covpen = metrics->add_subcommand("covpen", "coverage penalty");
  covpen->add_option("--att", covpen_args.att, "attention matrix (JSON rows)")
      ->required();
  covpen->add_option("--beta", covpen_args.beta, "penalty weight")->required();
  covpen->add_option("--eps", covpen_args.eps, "column-sum floor (default 0.1)");

  GradcheckArgs gradcheck_args;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "run the oracle-equivalence and finite-difference suites");
  gradcheck->add_option("--transform", gradcheck_args.transform,
                        "transform to check (default csparsemax)");
  gradcheck->add_option("--trials", gradcheck_args.trials,
                        "instances per size / gradient points (default 1000)");
  gradcheck->add_option("--seed", gradcheck_args.seed, "RNG seed (default 42)");
  gradcheck->add_option("--jmax", gradcheck_args.jmax, "largest vector size (default 8)");
  gradcheck->add_option("--step", gradcheck_args.h, "finite-difference step");
  gradcheck->add_option("--ftol", gradcheck_args.ftol, "forward tolerance");
  gradcheck->add_option("--gtol", gradcheck_args.gtol, "gradient tolerance");
  gradcheck->add_option("--rtol", gradcheck_args.rtol, "reduction tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  session_args.fertility_given = fert_opt->count() > 0;

  if (project->parsed()) return guarded([&] { return run_project(project_args); });
  if (session->parsed()) return guarded([&] { return run_session(session_args); });
  if (fertility->parsed() && guided->parsed()) {
    return guarded([&] { return run_fertility_guided(guided_args); });
  }
  if (metrics->parsed()) {
    if (rep->parsed()) return guarded([&] { return run_metrics_rep(rep_args); });
    if (drop->parsed()) return guarded([&] { return run_metrics_drop(drop_args); });
    if (covpen->parsed()) {
      return guarded([&] { return run_metrics_covpen(covpen_args); });
    }
  }
  if (gradcheck->parsed()) {
    return guarded([&] { return run_gradcheck(gradcheck_args); });
  }
  std::cerr << app.help();
  return 2;
}
