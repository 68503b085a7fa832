#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nalda/corpus.hpp"
#include "nalda/errors.hpp"
#include "nalda/matrix.hpp"

namespace nalda {

// Pre-trained word vectors (word2vec text format) plus the map g from
// vocabulary indices to embedding rows. Words outside the dictionary map
// to -1; the engine substitutes a uniform topic factor for them.
struct EmbeddingTable {
  int dim = 0;                                     // E
  Matrix vectors;                                  // rows x E
  std::vector<std::string> row_words;
  std::unordered_map<std::string, int> word_to_row;
  std::vector<int> index_map;                      // per vocabulary word: row or -1
  double coverage = 0.0;                           // covered fraction of the vocabulary

  bool has_row(int vocab_word) const {
    return vocab_word >= 0 && vocab_word < static_cast<int>(index_map.size()) &&
           index_map[static_cast<std::size_t>(vocab_word)] >= 0;
  }

  std::span<const double> vec(int vocab_word) const {
    return vectors.row(index_map[static_cast<std::size_t>(vocab_word)]);
  }

  // Re-resolves g against a different vocabulary (e.g. a held-out corpus whose
  // vocabulary extends the training one).
  void rebuild_index(const std::vector<std::string>& vocabulary) {
    index_map.assign(vocabulary.size(), -1);
    int covered = 0;
    for (std::size_t w = 0; w < vocabulary.size(); ++w) {
      auto it = word_to_row.find(vocabulary[w]);
      if (it != word_to_row.end()) {
        index_map[w] = it->second;
        ++covered;
      }
    }
    coverage = vocabulary.empty() ? 0.0 : static_cast<double>(covered) / vocabulary.size();
  }
};

// word2vec text format: an optional "N E" header line, then one line per word:
// "word f1 f2 ... fE". The vector length is fixed by the header or by the
// first data line; later deviations are errors.
inline EmbeddingTable load_embeddings(const std::string& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file: " + path);

  EmbeddingTable table;
  std::vector<double> flat;
  int line_no = 0;
  std::string line;
  bool first_content = true;

  while (detail::next_content_line(in, line, line_no)) {
    auto toks = detail::split_ws(line);
    if (first_content) {
      first_content = false;
      long long n, e;
      if (toks.size() == 2 && detail::parse_ll(toks[0], n) && detail::parse_ll(toks[1], e) &&
          n >= 0 && e >= 1) {
        table.dim = static_cast<int>(e);  // header line
        continue;
      }
    }
    if (toks.size() < 2)
      throw ParseError("malformed embedding line at line " + std::to_string(line_no));
    const int e = static_cast<int>(toks.size()) - 1;
    if (table.dim == 0) table.dim = e;
    if (e != table.dim)
      throw ParseError("dimension mismatch at line " + std::to_string(line_no));
    if (table.word_to_row.count(toks[0])) continue;  // keep the first occurrence
    for (int j = 1; j <= e; ++j) {
      double v;
      if (!detail::parse_double(toks[static_cast<std::size_t>(j)], v))
        throw ParseError("non-numeric component at line " + std::to_string(line_no));
      flat.push_back(v);
    }
    table.word_to_row.emplace(toks[0], static_cast<int>(table.row_words.size()));
    table.row_words.push_back(toks[0]);
  }

  const int rows = static_cast<int>(table.row_words.size());
  table.vectors = Matrix(rows, table.dim);
  table.vectors.data() = std::move(flat);
  table.rebuild_index(corpus.vocabulary);
  if (rows > 0 && table.coverage == 0.0)
    std::cerr << "warning: embeddings cover none of the " << corpus.num_words
              << " vocabulary words\n";
  return table;
}

inline void write_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings file: " + path);
  out << table.vectors.rows() << " " << table.dim << "\n";
  out.precision(10);
  for (int r = 0; r < table.vectors.rows(); ++r) {
    out << table.row_words[static_cast<std::size_t>(r)];
    for (double v : table.vectors.row(r)) out << " " << v;
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

// Documents whose embedded-token total meets the threshold; used by the
// optional --min-embedded-words preprocessing filter.
inline std::vector<int> docs_with_min_embedded_tokens(const Corpus& corpus,
                                                      const EmbeddingTable& table,
                                                      double min_tokens) {
  std::vector<int> keep;
  for (int d = 0; d < corpus.num_docs; ++d) {
    double covered = 0.0;
    for (int i = corpus.doc_begin[d]; i < corpus.doc_begin[d + 1]; ++i) {
      const Entry& e = corpus.entries[static_cast<std::size_t>(i)];
      if (table.has_row(e.word)) covered += e.count;
    }
    if (covered >= min_tokens) keep.push_back(d);
  }
  return keep;
}

}  // namespace nalda
