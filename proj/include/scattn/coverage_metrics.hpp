#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "scattn/corpus.hpp"
#include "scattn/types.hpp"

namespace scattn {

namespace detail {

// Tokens are whitespace-free, so a space join is an unambiguous n-gram key.
inline std::unordered_map<std::string, int> ngram_counts(
    const std::vector<std::string>& sent, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(sent.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= sent.size(); ++i) {
    std::string key = sent[i];
    for (int k = 1; k < n; ++k) {
      key += ' ';
      key += sent[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

// Count of positions i with token_i == token_{i+1}, per token; a run of
// length k contributes k-1.
inline std::unordered_map<std::string, int> duplicate_counts(
    const std::vector<std::string>& sent) {
  std::unordered_map<std::string, int> counts;
  for (std::size_t i = 0; i + 1 < sent.size(); ++i) {
    if (sent[i] == sent[i + 1]) ++counts[sent[i]];
  }
  return counts;
}

inline int count_or_zero(const std::unordered_map<std::string, int>& m,
                         const std::string& key) {
  const auto it = m.find(key);
  return it != m.end() ? it->second : 0;
}

}  // namespace detail

/// Repetition score. Per sentence, counts hypothesis n-grams occurring at
/// least twice beyond their reference frequency (weight lambda1) and
/// consecutive duplicate words beyond the reference (weight lambda2); the
/// corpus total is normalized by the reference word count and scaled by 100.
/// A duplicate bigram with two or more occurrences is counted by both terms.
inline double rep_score(const Corpus& hyp, const Corpus& ref, int n = 2,
                        double lambda1 = 1.0, double lambda2 = 2.0) {
  if (hyp.sentences.size() != ref.sentences.size()) {
    throw SentenceCountMismatch("rep_score: hypothesis has " +
                                std::to_string(hyp.sentences.size()) +
                                " sentences, reference " +
                                std::to_string(ref.sentences.size()));
  }
  if (n < 1) throw std::invalid_argument("rep_score: n must be >= 1");
  if (ref.token_count == 0) throw EmptyReference("rep_score: empty reference corpus");

  StableSum total;
  for (std::size_t s = 0; s < hyp.sentences.size(); ++s) {
    const auto hgrams = detail::ngram_counts(hyp.sentences[s], n);
    const auto rgrams = detail::ngram_counts(ref.sentences[s], n);
    double t1 = 0.0;
    for (const auto& [gram, cnt] : hgrams) {
      if (cnt >= 2) {
        t1 += std::max(0, cnt - detail::count_or_zero(rgrams, gram));
      }
    }
    const auto hdup = detail::duplicate_counts(hyp.sentences[s]);
    const auto rdup = detail::duplicate_counts(ref.sentences[s]);
    double t2 = 0.0;
    for (const auto& [word, cnt] : hdup) {
      t2 += std::max(0, cnt - detail::count_or_zero(rdup, word));
    }
    total.add(lambda1 * t1 + lambda2 * t2);
  }
  return 100.0 * total.value() / static_cast<double>(ref.token_count);
}

/// Percentage of source tokens aligned to some reference word but to no
/// hypothesis word.
inline double drop_score(const Corpus& src, const AlignmentSet& ref_align,
                         const AlignmentSet& hyp_align) {
  if (ref_align.sentences.size() != src.sentences.size() ||
      hyp_align.sentences.size() != src.sentences.size()) {
    throw SentenceCountMismatch("drop_score: sentence counts differ");
  }
  std::size_t dropped = 0;
  std::vector<char> in_ref, in_hyp;
  for (std::size_t s = 0; s < src.sentences.size(); ++s) {
    const std::size_t len = src.sentences[s].size();
    in_ref.assign(len, 0);
    in_hyp.assign(len, 0);
    auto mark = [&](const std::vector<std::pair<int, int>>& pairs,
                    std::vector<char>& flags) {
      for (const auto& [i, t] : pairs) {
        if (i >= static_cast<int>(len)) {
          throw IndexOutOfRange("drop_score: source index " + std::to_string(i) +
                                " out of range in sentence " + std::to_string(s));
        }
        flags[static_cast<std::size_t>(i)] = 1;
      }
    };
    mark(ref_align.sentences[s], in_ref);
    mark(hyp_align.sentences[s], in_hyp);
    for (std::size_t i = 0; i < len; ++i) {
      if (in_ref[i] && !in_hyp[i]) ++dropped;
    }
  }
  if (src.token_count == 0) return 0.0;
  return 100.0 * static_cast<double>(dropped) /
         static_cast<double>(src.token_count);
}

/// Coverage penalty over an attention matrix (rows = target steps):
///   cp = beta * sum_j ln(max(eps, min(1, column_sum_j)))
/// The eps floor keeps columns that received no attention from sending the
/// penalty to -inf.
inline double coverage_penalty(const std::vector<Vec>& attention, double beta,
                               double eps = 0.1) {
  if (!(beta >= 0.0)) throw std::invalid_argument("coverage_penalty: beta must be >= 0");
  if (!(eps > 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("coverage_penalty: eps must be in (0, 1]");
  }
  if (attention.empty()) return 0.0;
  const std::size_t cols = attention.front().size();
  for (const auto& row : attention) {
    if (row.size() != cols) {
      throw LengthMismatch("coverage_penalty: ragged attention matrix");
    }
    double rs = 0.0;
    for (double v : row) rs += v;
    if (std::fabs(rs - 1.0) > 1e-6) {
      throw std::invalid_argument("coverage_penalty: attention rows must sum to 1");
    }
  }
  StableSum cp;
  for (std::size_t j = 0; j < cols; ++j) {
    StableSum col;
    for (const auto& row : attention) col.add(row[j]);
    cp.add(std::log(std::max(eps, std::min(1.0, col.value()))));
  }
  return beta * cp.value();
}

}  // namespace scattn
