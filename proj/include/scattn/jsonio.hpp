#pragma once

#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scattn/types.hpp"

namespace scattn {

using Json = nlohmann::ordered_json;

/// Non-finite entries are serialized as the strings "inf"/"-inf"; JSON has no
/// literal for them and nlohmann would otherwise emit null.
inline Json vec_to_json(const Vec& v) {
  Json arr = Json::array();
  for (double x : v) {
    if (std::isfinite(x)) {
      arr.push_back(x);
    } else if (x == kInf) {
      arr.push_back("inf");
    } else {
      arr.push_back("-inf");
    }
  }
  return arr;
}

inline Vec vec_from_json(const Json& arr) {
  if (!arr.is_array()) throw ParseError("expected a JSON array of numbers");
  Vec v;
  v.reserve(arr.size());
  for (const auto& e : arr) {
    if (e.is_number()) {
      v.push_back(e.get<double>());
    } else if (e.is_string() && e.get<std::string>() == "inf") {
      v.push_back(kInf);
    } else if (e.is_string() && e.get<std::string>() == "-inf") {
      v.push_back(-kInf);
    } else {
      throw ParseError("expected a number or \"inf\" in array");
    }
  }
  return v;
}

inline Json cert_to_json(const ProjectionCertificate& cert) {
  Json j;
  j["tau"] = cert.tau;
  j["free"] = cert.free;
  j["zero"] = cert.zero;
  j["clipped"] = cert.clipped;
  return j;
}

/// One JSON array per line; blank lines are skipped.
inline std::vector<Vec> read_score_lines(std::istream& in) {
  std::vector<Vec> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("scores line " + std::to_string(lineno) + ": " + e.what());
    }
    rows.push_back(vec_from_json(j));
  }
  return rows;
}

/// Attention matrix reader. Accepts a whole-document JSON array of rows, or
/// JSON-lines as written by the session command (a trailing object line, e.g.
/// the final cumulative-attention record, is ignored).
inline std::vector<Vec> read_attention_matrix(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::vector<Vec> rows;
  Json doc = Json::parse(text, nullptr, false);
  if (!doc.is_discarded()) {
    if (!doc.is_array()) throw ParseError("attention: expected an array of rows");
    for (const auto& row : doc) rows.push_back(vec_from_json(row));
    return rows;
  }
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ParseError("attention line " + std::to_string(lineno) + ": bad JSON");
    }
    if (j.is_object()) continue;
    rows.push_back(vec_from_json(j));
  }
  return rows;
}

}  // namespace scattn
