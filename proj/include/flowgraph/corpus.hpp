// Copyright 2026 The flowgraph Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOWGRAPH_CORPUS_HPP_
#define FLOWGRAPH_CORPUS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgraph/error.hpp"
#include "flowgraph/rng.hpp"

namespace flowgraph {

enum class SentenceType { kAction, kInformation, kBoth, kCode, kNone };

inline constexpr int kNumSentenceTypes = 5;

// Annotation spelling: A, I, A/I, C, NONE.
inline std::string_view to_string(SentenceType t) {
  switch (t) {
    case SentenceType::kAction: return "A";
    case SentenceType::kInformation: return "I";
    case SentenceType::kBoth: return "A/I";
    case SentenceType::kCode: return "C";
    case SentenceType::kNone: return "NONE";
  }
  return "NONE";
}

inline std::optional<SentenceType> parse_sentence_type(std::string_view s) {
  std::string up;
  for (char c : s) {
    if (c == ' ' || c == '\t') continue;
    up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (up == "A") return SentenceType::kAction;
  if (up == "I") return SentenceType::kInformation;
  if (up == "A/I" || up == "A-I" || up == "AI") return SentenceType::kBoth;
  if (up == "C") return SentenceType::kCode;
  if (up == "NONE") return SentenceType::kNone;
  return std::nullopt;
}

struct SentenceRecord {
  std::size_t index = 0;
  std::string text;
  SentenceType stype = SentenceType::kAction;

  bool operator==(const SentenceRecord&) const = default;
};

using Edge = std::pair<std::size_t, std::size_t>;
using EdgeSet = std::set<Edge>;

struct Document {
  std::string id;
  std::vector<SentenceRecord> sentences;
  EdgeSet gold_edges;

  std::size_t size() const { return sentences.size(); }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(s.text);
    return out;
  }

  bool operator==(const Document&) const = default;
};

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace detail

// Throws ValidationError unless indices are contiguous from 0, every text is
// non-empty after trimming, and every gold edge is forward and in range.
inline void validate(const Document& doc) {
  const std::size_t n = doc.sentences.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (doc.sentences[i].index != i) {
      throw ValidationError("document '" + doc.id + "': sentence " +
                            std::to_string(i) + " carries index " +
                            std::to_string(doc.sentences[i].index));
    }
    if (detail::trim(doc.sentences[i].text).empty()) {
      throw ValidationError("document '" + doc.id + "': sentence " +
                            std::to_string(i) + " has empty text");
    }
  }
  for (const auto& [i, j] : doc.gold_edges) {
    if (j <= i) {
      throw ValidationError("document '" + doc.id + "': backward edge (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    if (j >= n) {
      throw ValidationError("document '" + doc.id + "': edge (" +
                            std::to_string(i) + ", " + std::to_string(j) +
                            ") out of range for " + std::to_string(n) +
                            " sentences");
    }
  }
}

/// Splits raw text into sentences.
///
/// A boundary follows '.', '!' or '?' when the next character is whitespace,
/// except inside a ``` fenced block or inside parentheses. Segments are
/// trimmed and empty ones dropped. Re-splitting the space-joined output
/// reproduces it.
inline std::vector<std::string> split_sentences(std::string_view raw) {
  std::vector<std::string> out;
  auto emit = [&](std::string_view seg) {
    seg = detail::trim(seg);
    if (!seg.empty()) out.emplace_back(seg);
  };
  bool in_fence = false;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (raw.compare(i, 3, "```") == 0) {
      in_fence = !in_fence;
      i += 2;
      continue;
    }
    if (in_fence) continue;
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      depth = std::max(0, depth - 1);
    } else if ((c == '.' || c == '!' || c == '?') && depth == 0 &&
               i + 1 < raw.size() && detail::is_space(raw[i + 1])) {
      emit(raw.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < raw.size()) emit(raw.substr(start));
  return out;
}

namespace detail {

// One CSV record with the 1-based line it starts on.
struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and
// newlines. A UTF-8 BOM is skipped.
inline std::vector<CsvRow> read_csv(std::string_view payload) {
  std::vector<CsvRow> rows;
  if (payload.substr(0, 3) == "\xEF\xBB\xBF") payload.remove_prefix(3);
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < payload.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool row_done = false;
    while (!row_done) {
      field.clear();
      if (i < payload.size() && payload[i] == '"') {
        const std::size_t open_line = line;
        ++i;
        bool closed = false;
        while (i < payload.size()) {
          const char c = payload[i++];
          if (c == '"') {
            if (i < payload.size() && payload[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              closed = true;
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (!closed) throw ParseError("unterminated quoted field", open_line);
        if (i < payload.size() && payload[i] != ',' && payload[i] != '\n' &&
            payload[i] != '\r') {
          throw ParseError("unexpected character after closing quote", line);
        }
      } else {
        while (i < payload.size() && payload[i] != ',' && payload[i] != '\n' &&
               payload[i] != '\r') {
          if (payload[i] == '"') {
            throw ParseError("stray quote in unquoted field", line);
          }
          field.push_back(payload[i++]);
        }
      }
      row.fields.push_back(field);
      if (i >= payload.size()) {
        row_done = true;
      } else if (payload[i] == ',') {
        ++i;
      } else {
        if (payload[i] == '\r') ++i;
        if (i < payload.size() && payload[i] == '\n') ++i;
        ++line;
        row_done = true;
      }
    }
    const bool blank = row.fields.size() == 1 && trim(row.fields[0]).empty();
    if (!blank) rows.push_back(std::move(row));
  }
  return rows;
}

inline std::size_t parse_index(std::string_view s, std::size_t line,
                               const char* what) {
  s = trim(s);
  if (s.empty()) throw ParseError(std::string("empty ") + what, line);
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') {
      throw ParseError(std::string("invalid ") + what + " '" + std::string(s) +
                           "'",
                       line);
    }
    v = v * 10 + static_cast<std::size_t>(c - '0');
    if (v > 100000000) throw ParseError(std::string(what) + " too large", line);
  }
  return v;
}

}  // namespace detail

/// Parses one annotation CSV (columns sent_id, text, stype, next_ids; header
/// row required, column order free). Rows may appear in any order but ids
/// must cover 0..n-1 exactly once.
inline Document parse_annotations(std::string_view payload,
                                  std::string doc_id = {}) {
  const auto rows = detail::read_csv(payload);
  if (rows.empty()) throw ParseError("missing header row", 1);

  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < rows[0].fields.size(); ++c) {
    col[std::string(detail::trim(rows[0].fields[c]))] = c;
  }
  for (const char* name : {"sent_id", "text", "stype", "next_ids"}) {
    if (!col.count(name)) {
      throw ParseError(std::string("header lacks column '") + name + "'",
                       rows[0].line);
    }
  }
  const std::size_t width = rows[0].fields.size();

  struct Pending {
    SentenceRecord rec;
    std::vector<std::size_t> next;
    std::size_t line;
  };
  std::map<std::size_t, Pending> by_id;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " +
                           std::to_string(row.fields.size()),
                       row.line);
    }
    Pending p;
    p.line = row.line;
    p.rec.index = detail::parse_index(row.fields[col["sent_id"]], row.line,
                                      "sent_id");
    p.rec.text = std::string(detail::trim(row.fields[col["text"]]));
    const auto st = parse_sentence_type(row.fields[col["stype"]]);
    if (!st) {
      throw ParseError("unknown stype '" + row.fields[col["stype"]] + "'",
                       row.line);
    }
    p.rec.stype = *st;
    std::string_view next = row.fields[col["next_ids"]];
    while (!detail::trim(next).empty()) {
      const auto semi = next.find(';');
      p.next.push_back(
          detail::parse_index(next.substr(0, semi), row.line, "next_id"));
      if (semi == std::string_view::npos) break;
      next.remove_prefix(semi + 1);
    }
    if (p.rec.text.empty()) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": empty sentence text");
    }
    const std::size_t id = p.rec.index;
    if (!by_id.emplace(id, std::move(p)).second) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": duplicate sent_id " + std::to_string(id));
    }
  }

  Document doc;
  doc.id = std::move(doc_id);
  const std::size_t n = by_id.size();
  for (auto& [id, p] : by_id) {
    if (id != doc.sentences.size()) {
      throw ValidationError("sent_id values must be contiguous from 0; "
                            "missing " + std::to_string(doc.sentences.size()));
    }
    for (std::size_t j : p.next) {
      if (j <= id) {
        throw ValidationError("line " + std::to_string(p.line) +
                              ": backward edge " + std::to_string(id) +
                              " -> " + std::to_string(j));
      }
      if (j >= n) {
        throw ValidationError("line " + std::to_string(p.line) +
                              ": next_id " + std::to_string(j) +
                              " out of range (" + std::to_string(n) +
                              " sentences)");
      }
      doc.gold_edges.emplace(id, j);
    }
    doc.sentences.push_back(std::move(p.rec));
  }
  return doc;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return ss.str();
}

inline void write_file(const std::filesystem::path& path,
                       std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

// Document id is the filename stem.
inline Document load_annotation_file(const std::filesystem::path& path) {
  const std::string payload = read_file(path);
  try {
    return parse_annotations(payload, path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Emits the annotation CSV for a document (inverse of parse_annotations).
inline std::string to_annotation_csv(const Document& doc) {
  std::string out = "sent_id,text,stype,next_ids\n";
  std::vector<std::vector<std::size_t>> next(doc.size());
  for (const auto& [i, j] : doc.gold_edges) next[i].push_back(j);
  for (const auto& s : doc.sentences) {
    out += std::to_string(s.index);
    out += ",\"";
    for (char c : s.text) {
      if (c == '"') out += '"';
      out += c;
    }
    out += "\",";
    out += to_string(s.stype);
    out += ',';
    for (std::size_t k = 0; k < next[s.index].size(); ++k) {
      if (k) out += ';';
      out += std::to_string(next[s.index][k]);
    }
    out += '\n';
  }
  return out;
}

/// Removes NONE sentences (and CODE ones when `drop_code`), re-indexes the
/// survivors and remaps gold edges. Edges touching a removed sentence go.
inline Document filter_relevant(const Document& doc, bool drop_code = false) {
  constexpr std::size_t kGone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(doc.size(), kGone);
  Document out;
  out.id = doc.id;
  for (const auto& s : doc.sentences) {
    const bool drop = s.stype == SentenceType::kNone ||
                      (drop_code && s.stype == SentenceType::kCode);
    if (drop) continue;
    remap[s.index] = out.sentences.size();
    out.sentences.push_back({out.sentences.size(), s.text, s.stype});
  }
  for (const auto& [i, j] : doc.gold_edges) {
    if (remap[i] != kGone && remap[j] != kGone) {
      out.gold_edges.emplace(remap[i], remap[j]);
    }
  }
  return out;
}

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// 70:10:20 partition of document ids after a seeded shuffle. Train and
/// validation take floor(0.7N) and floor(0.1N); test takes the remainder,
/// except that a corpus too small for any train document still gives the
/// first shuffled one to train.
inline DatasetSplit split_dataset(const std::vector<std::string>& ids,
                                  std::uint64_t seed) {
  if (ids.empty()) throw ValidationError("cannot split an empty corpus");
  {
    std::set<std::string> seen(ids.begin(), ids.end());
    if (seen.size() != ids.size()) {
      throw ValidationError("duplicate document ids in corpus");
    }
  }
  std::vector<std::string> order = ids;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n = order.size();
  std::size_t n_train = n * 7 / 10;
  const std::size_t n_val = n / 10;
  if (n_train == 0) n_train = 1;
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train,
                          order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

inline DatasetSplit split_dataset(const std::vector<Document>& docs,
                                  std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(d.id);
  return split_dataset(ids, seed);
}

struct DocumentStats {
  std::string id;
  std::size_t sentences = 0;
  std::size_t edges = 0;
  std::size_t pairs = 0;
  double avg_sentence_len = 0.0;
};

struct CorpusStats {
  std::size_t doc_count = 0;
  double avg_doc_size = 0.0;
  double avg_sentence_len = 0.0;
  std::size_t edge_count = 0;
  std::size_t pair_count = 0;
  double edge_ratio = 0.0;
  // Mean of in-degree + out-degree over all sentences: 2|E| / sentences.
  double avg_node_degree = 0.0;
  std::vector<DocumentStats> per_document;
};

/// Corpus statistics. Sentence length counts UTF-8 code points; the pair
/// count behind edge_ratio is n(n-1)/2 per document.
inline CorpusStats compute_stats(const std::vector<Document>& docs) {
  CorpusStats st;
  st.doc_count = docs.size();
  std::size_t sentences = 0;
  std::size_t chars = 0;
  for (const auto& d : docs) {
    DocumentStats ds;
    ds.id = d.id;
    ds.sentences = d.size();
    ds.edges = d.gold_edges.size();
    ds.pairs = d.size() * (d.size() ? d.size() - 1 : 0) / 2;
    std::size_t doc_chars = 0;
    for (const auto& s : d.sentences) doc_chars += detail::utf8_length(s.text);
    ds.avg_sentence_len =
        ds.sentences ? static_cast<double>(doc_chars) / ds.sentences : 0.0;
    sentences += ds.sentences;
    chars += doc_chars;
    st.edge_count += ds.edges;
    st.pair_count += ds.pairs;
    st.per_document.push_back(std::move(ds));
  }
  if (st.doc_count) {
    st.avg_doc_size = static_cast<double>(sentences) / st.doc_count;
  }
  if (sentences) {
    st.avg_sentence_len = static_cast<double>(chars) / sentences;
    st.avg_node_degree = 2.0 * static_cast<double>(st.edge_count) / sentences;
  }
  if (st.pair_count) {
    st.edge_ratio = static_cast<double>(st.edge_count) / st.pair_count;
  }
  return st;
}

inline nlohmann::json to_json(const CorpusStats& st) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& d : st.per_document) {
    per.push_back({{"id", d.id},
                   {"sentences", d.sentences},
                   {"edges", d.edges},
                   {"pairs", d.pairs},
                   {"avg_sentence_len", d.avg_sentence_len}});
  }
  return {{"doc_count", st.doc_count},
          {"avg_doc_size", st.avg_doc_size},
          {"avg_sentence_len", st.avg_sentence_len},
          {"edge_count", st.edge_count},
          {"pair_count", st.pair_count},
          {"edge_ratio", st.edge_ratio},
          {"avg_node_degree", st.avg_node_degree},
          {"per_document", per}};
}

// Canonical prepared-document form: {id, sentences[], stypes[], edges[[i,j]]}.
inline nlohmann::json to_json(const Document& doc) {
  nlohmann::json sentences = nlohmann::json::array();
  nlohmann::json stypes = nlohmann::json::array();
  for (const auto& s : doc.sentences) {
    sentences.push_back(s.text);
    stypes.push_back(std::string(to_string(s.stype)));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [i, j] : doc.gold_edges) edges.push_back({i, j});
  return {{"id", doc.id},
          {"sentences", sentences},
          {"stypes", stypes},
          {"edges", edges}};
}

inline Document document_from_json(const nlohmann::json& j) {
  Document doc;
  try {
    doc.id = j.at("id").get<std::string>();
    const auto& sentences = j.at("sentences");
    const auto& stypes = j.at("stypes");
    if (sentences.size() != stypes.size()) {
      throw ValidationError("document '" + doc.id +
                            "': sentences and stypes differ in length");
    }
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto st = parse_sentence_type(stypes[i].get<std::string>());
      if (!st) {
        throw ValidationError("document '" + doc.id + "': unknown stype '" +
                              stypes[i].get<std::string>() + "'");
      }
      doc.sentences.push_back({i, sentences[i].get<std::string>(), *st});
    }
    for (const auto& e : j.at("edges")) {
      const auto edge = Edge{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()};
      if (!doc.gold_edges.insert(edge).second) {
        throw ValidationError("document '" + doc.id + "': duplicate edge");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed document JSON: ") + e.what());
  }
  validate(doc);
  return doc;
}

inline Document load_document_json(const std::filesystem::path& path) {
  try {
    return document_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
};

/// Reads a corpus manifest: a JSON array of {"id", "path"} objects (a bare
/// path string is accepted, id = stem). Relative paths resolve against the
/// manifest's directory.
inline std::vector<ManifestEntry> load_manifest(
    const std::filesystem::path& manifest_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  if (!j.is_array()) {
    throw ValidationError(manifest_path.string() + ": manifest must be an array");
  }
  const auto base = manifest_path.parent_path();
  std::vector<ManifestEntry> out;
  for (const auto& item : j) {
    ManifestEntry e;
    if (item.is_string()) {
      e.path = item.get<std::string>();
      e.id = e.path.stem().string();
    } else if (item.is_object() && item.contains("path")) {
      e.path = item.at("path").get<std::string>();
      e.id = item.value("id", e.path.stem().string());
    } else {
      throw ValidationError(manifest_path.string() +
                            ": manifest entries need a 'path'");
    }
    if (e.path.is_relative()) e.path = base / e.path;
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& manifest_path,
                           const std::vector<ManifestEntry>& entries) {
  nlohmann::json j = nlohmann::json::array();
  const auto base = manifest_path.parent_path();
  for (const auto& e : entries) {
    auto rel = e.path.lexically_relative(base);
    j.push_back({{"id", e.id},
                 {"path", (rel.empty() ? e.path : rel).generic_string()}});
  }
  write_file(manifest_path, j.dump(2) + "\n");
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_CORPUS_HPP_
