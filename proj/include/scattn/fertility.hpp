#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "scattn/corpus.hpp"
#include "scattn/types.hpp"

namespace scattn {

enum class FertilityStrategy { constant, guided, predicted };

inline FertilityStrategy fertility_strategy_from_name(const std::string& name) {
  if (name == "constant") return FertilityStrategy::constant;
  if (name == "guided") return FertilityStrategy::guided;
  if (name == "predicted") return FertilityStrategy::predicted;
  throw std::invalid_argument("unknown fertility strategy: " + name);
}

/// Type-keyed fertility estimates. Stored values are final (any additive
/// constant was baked in when the table was built); unknown tokens fall back
/// to unknown_floor + add_constant.
struct FertilityTable {
  std::unordered_map<std::string, double> values;
  double unknown_floor = 1.0;
  double add_constant = 0.0;

  double lookup(const std::string& token) const {
    const auto it = values.find(token);
    return it != values.end() ? it->second : unknown_floor + add_constant;
  }
};

/// Per-token fertility vector for one source sentence, with the unbounded
/// sink entry appended. guided/predicted read the table; constant fills a
/// fixed value.
inline Vec assign_fertilities(FertilityStrategy strategy,
                              const std::vector<std::string>& tokens,
                              const FertilityTable* table,
                              double constant_value = 0.0) {
  Vec f;
  f.reserve(tokens.size() + 1);
  switch (strategy) {
    case FertilityStrategy::constant:
      if (!(constant_value >= 0.0)) {
        throw std::invalid_argument("constant fertility must be >= 0");
      }
      f.assign(tokens.size(), constant_value);
      break;
    case FertilityStrategy::guided:
    case FertilityStrategy::predicted:
      if (!table) {
        throw MissingTable("guided/predicted fertility needs a table");
      }
      for (const auto& tok : tokens) f.push_back(table->lookup(tok));
      break;
  }
  f.push_back(kInf);
  return f;
}

/// Builds a guided table from aligned training data: each token type gets the
/// maximal alignment degree over its occurrences, floored at 1 for types never
/// aligned, plus `add` on top.
inline FertilityTable build_guided_table(const Corpus& source,
                                         const AlignmentSet& alignments,
                                         double add) {
  if (!(add >= 0.0)) throw std::invalid_argument("additive constant must be >= 0");
  if (alignments.sentences.size() != source.sentences.size()) {
    throw SentenceCountMismatch("guided table: corpus has " +
                                std::to_string(source.sentences.size()) +
                                " sentences, alignments " +
                                std::to_string(alignments.sentences.size()));
  }
  std::unordered_map<std::string, double> max_degree;
  std::vector<int> degree;
  for (std::size_t s = 0; s < source.sentences.size(); ++s) {
    const auto& sent = source.sentences[s];
    degree.assign(sent.size(), 0);
    for (const auto& [src, tgt] : alignments.sentences[s]) {
      if (src >= static_cast<int>(sent.size())) {
        throw LengthMismatch("guided table: alignment index " + std::to_string(src) +
                             " exceeds sentence " + std::to_string(s) + " length " +
                             std::to_string(sent.size()));
      }
      ++degree[static_cast<std::size_t>(src)];
    }
    for (std::size_t i = 0; i < sent.size(); ++i) {
      auto& cur = max_degree[sent[i]];
      cur = std::max(cur, static_cast<double>(degree[i]));
    }
  }
  FertilityTable table;
  table.unknown_floor = 1.0;
  table.add_constant = add;
  for (auto& [tok, deg] : max_degree) {
    table.values[tok] = add + std::max(1.0, deg);
  }
  return table;
}

// ---------------------------------------------------------------------------
// table files: UTF-8 text, one `token<TAB>fertility` per line
// ---------------------------------------------------------------------------

inline FertilityTable read_fertility_table(std::istream& in) {
  FertilityTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError("fertility table line " + std::to_string(lineno) +
                       ": expected token<TAB>value");
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(line.substr(tab + 1), &used);
      if (std::isnan(v) || v < 0.0) throw std::invalid_argument("negative");
      table.values[line.substr(0, tab)] = v;
    } catch (const std::exception&) {
      throw ParseError("fertility table line " + std::to_string(lineno) +
                       ": bad fertility value");
    }
  }
  return table;
}

inline void write_fertility_table(std::ostream& out, const FertilityTable& table) {
  // sorted for reproducible files
  std::vector<std::pair<std::string, double>> rows(table.values.begin(),
                                                   table.values.end());
  std::sort(rows.begin(), rows.end());
  char buf[64];
  for (const auto& [tok, v] : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << tok << '\t' << buf << '\n';
  }
}

}  // namespace scattn
