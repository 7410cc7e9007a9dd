#pragma once

#include <algorithm>
#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scattn/types.hpp"

namespace scattn {

/// Whitespace-tokenized sentences, one per input line.
struct Corpus {
  std::vector<std::vector<std::string>> sentences;
  std::size_t token_count = 0;
};

/// Per-sentence word alignment pairs (source index, target index), 0-based.
/// Pairs are deduplicated and sorted.
struct AlignmentSet {
  std::vector<std::vector<std::pair<int, int>>> sentences;
};

inline Corpus read_corpus(std::istream& in) {
  Corpus c;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ss >> tok) toks.push_back(tok);
    c.token_count += toks.size();
    c.sentences.push_back(std::move(toks));
  }
  return c;
}

/// Reads `i-j` pairs, one sentence per line (fast_align convention). Blank
/// lines stand for sentences with no alignment.
inline AlignmentSet read_alignments(std::istream& in) {
  AlignmentSet a;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::pair<int, int>> pairs;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      const auto dash = tok.find('-');
      if (dash == std::string::npos || dash == 0 || dash + 1 == tok.size()) {
        throw ParseError("alignments line " + std::to_string(lineno) +
                         ": expected i-j, got '" + tok + "'");
      }
      int src = -1;
      int tgt = -1;
      const char* sbeg = tok.data();
      const char* send = tok.data() + dash;
      const char* tbeg = tok.data() + dash + 1;
      const char* tend = tok.data() + tok.size();
      auto r1 = std::from_chars(sbeg, send, src);
      auto r2 = std::from_chars(tbeg, tend, tgt);
      if (r1.ec != std::errc{} || r1.ptr != send || r2.ec != std::errc{} ||
          r2.ptr != tend || src < 0 || tgt < 0) {
        throw ParseError("alignments line " + std::to_string(lineno) +
                         ": expected i-j, got '" + tok + "'");
      }
      pairs.emplace_back(src, tgt);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    a.sentences.push_back(std::move(pairs));
  }
  return a;
}

}  // namespace scattn
