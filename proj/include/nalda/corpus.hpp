#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "nalda/errors.hpp"

namespace nalda {

// One nonzero cell of the document-word count matrix. Indices are 0-based in
// memory; the on-disk formats are 1-based and converted at the boundary.
struct Entry {
  int doc = 0;
  int word = 0;
  double count = 0.0;
};

// Sparse bag-of-words corpus: D documents over a W-word vocabulary, entries
// sorted by (doc, word) with no duplicates. doc_begin is a CSR-style offset
// array so a document's entries form a contiguous range.
struct Corpus {
  int num_docs = 0;
  int num_words = 0;
  std::vector<Entry> entries;
  std::vector<std::string> vocabulary;
  std::vector<double> doc_lengths;  // per-document token totals
  std::vector<int> doc_begin;       // size num_docs + 1

  int num_entries() const { return static_cast<int>(entries.size()); }

  // entry index of (d, w), if present
  std::optional<int> find(int d, int w) const {
    const Entry key{d, w, 0.0};
    auto lo = entries.begin() + doc_begin[d];
    auto hi = entries.begin() + doc_begin[d + 1];
    auto it = std::lower_bound(lo, hi, key, [](const Entry& a, const Entry& b) {
      return a.word < b.word;
    });
    if (it == hi || it->word != w) return std::nullopt;
    return static_cast<int>(it - entries.begin());
  }

  // Called after entries are filled: sorts, rejects duplicates, builds
  // doc_lengths and doc_begin.
  void finalize() {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.doc != b.doc ? a.doc < b.doc : a.word < b.word;
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].doc == entries[i - 1].doc && entries[i].word == entries[i - 1].word)
        throw ParseError("duplicate entry (" + std::to_string(entries[i].doc + 1) + "," +
                         std::to_string(entries[i].word + 1) + ")");
    }
    doc_lengths.assign(static_cast<std::size_t>(num_docs), 0.0);
    doc_begin.assign(static_cast<std::size_t>(num_docs) + 1, 0);
    for (const Entry& e : entries) {
      doc_lengths[static_cast<std::size_t>(e.doc)] += e.count;
      ++doc_begin[static_cast<std::size_t>(e.doc) + 1];
    }
    for (int d = 0; d < num_docs; ++d) doc_begin[d + 1] += doc_begin[d];
  }
};

enum class LabelKind { classification, regression };

// Per-document labels. Classification labels are stored 0-based; the label
// files carry them 1-based.
struct LabelSet {
  LabelKind kind = LabelKind::classification;
  int class_count = 0;          // S (classification only)
  std::vector<int> classes;     // classification, 0-based
  std::vector<double> values;   // regression

  int num_docs() const {
    return static_cast<int>(kind == LabelKind::classification ? classes.size() : values.size());
  }
};

namespace detail {

inline void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

inline bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline bool parse_ll(const std::string& tok, long long& out) {
  if (tok.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(tok, &pos);
  } catch (...) {
    return false;
  }
  return pos == tok.size();
}

inline bool parse_double(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(tok, &pos);
  } catch (...) {
    return false;
  }
  return pos == tok.size();
}

// Reads the next non-blank line; returns false at EOF. line_no tracks the
// 1-based physical line number of the returned line.
inline bool next_content_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (!blank(line)) return true;
  }
  return false;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream iss(line);
  std::string t;
  while (iss >> t) toks.push_back(t);
  return toks;
}

}  // namespace detail

// UCI bag-of-words reader. Header is three integer lines (D, W, NNZ) followed
// by NNZ lines "d w count", all 1-based. The vocabulary file supplies one word
// per line, exactly W of them.
inline Corpus load_corpus(const std::string& bow_path, const std::string& vocab_path) {
  std::ifstream in(bow_path);
  if (!in) throw IoError("cannot open bag-of-words file: " + bow_path);

  int line_no = 0;
  std::string line;
  long long header[3];
  for (int h = 0; h < 3; ++h) {
    if (!detail::next_content_line(in, line, line_no))
      throw ParseError("malformed header: expected 3 integer lines, file ended at line " +
                       std::to_string(line_no));
    if (!detail::parse_ll(line, header[h]))
      throw ParseError("malformed header at line " + std::to_string(line_no));
  }
  const long long D = header[0], W = header[1], NNZ = header[2];
  if (D < 1 || W < 1 || NNZ < 0)
    throw ParseError("malformed header: D and W must be >= 1 and NNZ >= 0");

  Corpus corpus;
  corpus.num_docs = static_cast<int>(D);
  corpus.num_words = static_cast<int>(W);
  corpus.entries.reserve(static_cast<std::size_t>(NNZ));
  std::vector<int> entry_lines;
  entry_lines.reserve(static_cast<std::size_t>(NNZ));

  long long seen = 0;
  while (detail::next_content_line(in, line, line_no)) {
    ++seen;
    if (seen > NNZ)
      throw ParseError("entry count mismatch: header says " + std::to_string(NNZ) +
                       ", extra data at line " + std::to_string(line_no));
    const auto toks = detail::split_ws(line);
    long long d, w, x;
    if (toks.size() != 3 || !detail::parse_ll(toks[0], d) || !detail::parse_ll(toks[1], w) ||
        !detail::parse_ll(toks[2], x))
      throw ParseError("malformed entry at line " + std::to_string(line_no));
    if (d < 1 || d > D)
      throw ParseError("document index out of range at line " + std::to_string(line_no));
    if (w < 1 || w > W)
      throw ParseError("word index out of range at line " + std::to_string(line_no));
    if (x < 1)
      throw ParseError("count must be >= 1 at line " + std::to_string(line_no));
    corpus.entries.push_back(
        {static_cast<int>(d - 1), static_cast<int>(w - 1), static_cast<double>(x)});
    entry_lines.push_back(line_no);
  }
  if (seen != NNZ)
    throw ParseError("entry count mismatch: header says " + std::to_string(NNZ) + ", file has " +
                     std::to_string(seen));

  // duplicate check with line attribution (the later occurrence is reported)
  std::vector<int> order(corpus.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Entry& ea = corpus.entries[static_cast<std::size_t>(a)];
    const Entry& eb = corpus.entries[static_cast<std::size_t>(b)];
    if (ea.doc != eb.doc) return ea.doc < eb.doc;
    if (ea.word != eb.word) return ea.word < eb.word;
    return a < b;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const Entry& a = corpus.entries[static_cast<std::size_t>(order[i - 1])];
    const Entry& b = corpus.entries[static_cast<std::size_t>(order[i])];
    if (a.doc == b.doc && a.word == b.word)
      throw ParseError("duplicate entry (" + std::to_string(b.doc + 1) + "," +
                       std::to_string(b.word + 1) + ") at line " +
                       std::to_string(entry_lines[static_cast<std::size_t>(order[i])]));
  }
  corpus.finalize();

  std::ifstream vin(vocab_path);
  if (!vin) throw IoError("cannot open vocabulary file: " + vocab_path);
  int vline_no = 0;
  std::string word;
  std::unordered_set<std::string> seen_words;
  while (detail::next_content_line(vin, word, vline_no)) {
    if (static_cast<long long>(corpus.vocabulary.size()) == W)
      throw ParseError("vocabulary line count mismatch: expected " + std::to_string(W) +
                       ", extra word at line " + std::to_string(vline_no));
    if (!seen_words.insert(word).second)
      throw ParseError("duplicate vocabulary word at line " + std::to_string(vline_no));
    corpus.vocabulary.push_back(word);
  }
  if (static_cast<long long>(corpus.vocabulary.size()) != W)
    throw ParseError("vocabulary line count mismatch: expected " + std::to_string(W) + ", got " +
                     std::to_string(corpus.vocabulary.size()));
  return corpus;
}

// Writes the corpus back in UCI form; reloading yields a field-identical value.
inline void write_corpus(const Corpus& corpus, const std::string& bow_path,
                         const std::string& vocab_path) {
  std::ofstream out(bow_path);
  if (!out) throw IoError("cannot write bag-of-words file: " + bow_path);
  out << corpus.num_docs << "\n" << corpus.num_words << "\n" << corpus.entries.size() << "\n";
  for (const Entry& e : corpus.entries)
    out << (e.doc + 1) << " " << (e.word + 1) << " " << static_cast<long long>(e.count) << "\n";
  if (!out) throw IoError("write failed: " + bow_path);

  std::ofstream vout(vocab_path);
  if (!vout) throw IoError("cannot write vocabulary file: " + vocab_path);
  for (const auto& w : corpus.vocabulary) vout << w << "\n";
  if (!vout) throw IoError("write failed: " + vocab_path);
}

// One label per document: positive integers for classification (S = max seen),
// decimal reals for regression.
inline LabelSet load_labels(const std::string& path, const Corpus& corpus, LabelKind kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  LabelSet labels;
  labels.kind = kind;
  int line_no = 0;
  std::string line;
  while (detail::next_content_line(in, line, line_no)) {
    if (labels.num_docs() == corpus.num_docs)
      throw ParseError("label count mismatch: expected " + std::to_string(corpus.num_docs) +
                       ", extra label at line " + std::to_string(line_no));
    if (kind == LabelKind::classification) {
      long long v;
      if (!detail::parse_ll(line, v))
        throw ParseError("non-numeric label at line " + std::to_string(line_no));
      if (v < 1) throw ParseError("class value < 1 at line " + std::to_string(line_no));
      labels.classes.push_back(static_cast<int>(v - 1));
      labels.class_count = std::max(labels.class_count, static_cast<int>(v));
    } else {
      double v;
      if (!detail::parse_double(line, v))
        throw ParseError("non-numeric label at line " + std::to_string(line_no));
      labels.values.push_back(v);
    }
  }
  if (labels.num_docs() != corpus.num_docs)
    throw ParseError("label count mismatch: expected " + std::to_string(corpus.num_docs) +
                     ", got " + std::to_string(labels.num_docs()));
  if (kind == LabelKind::classification && labels.class_count < 2)
    throw ParseError("classification labels define a single class; at least 2 are required");
  return labels;
}

inline void write_labels(const LabelSet& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write label file: " + path);
  if (labels.kind == LabelKind::classification)
    for (int c : labels.classes) out << (c + 1) << "\n";
  else
    for (double v : labels.values) out << v << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// Keeps the listed documents (ascending, 0-based) and renumbers them densely.
// The vocabulary is unchanged so word indices stay valid across splits.
inline Corpus subset_docs(const Corpus& corpus, const std::vector<int>& keep) {
  Corpus out;
  out.num_docs = static_cast<int>(keep.size());
  out.num_words = corpus.num_words;
  out.vocabulary = corpus.vocabulary;
  for (int new_d = 0; new_d < out.num_docs; ++new_d) {
    const int d = keep[static_cast<std::size_t>(new_d)];
    for (int i = corpus.doc_begin[d]; i < corpus.doc_begin[d + 1]; ++i)
      out.entries.push_back({new_d, corpus.entries[static_cast<std::size_t>(i)].word,
                             corpus.entries[static_cast<std::size_t>(i)].count});
  }
  out.finalize();
  return out;
}

inline LabelSet subset_labels(const LabelSet& labels, const std::vector<int>& keep) {
  LabelSet out;
  out.kind = labels.kind;
  out.class_count = labels.class_count;
  for (int d : keep) {
    if (labels.kind == LabelKind::classification)
      out.classes.push_back(labels.classes[static_cast<std::size_t>(d)]);
    else
      out.values.push_back(labels.values[static_cast<std::size_t>(d)]);
  }
  return out;
}

}  // namespace nalda
