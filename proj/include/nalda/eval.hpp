#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "nalda/corpus.hpp"
#include "nalda/matrix.hpp"

namespace nalda {

struct ClassificationMetrics {
  double cross_entropy = 0.0;
  double accuracy = 0.0;
};

// Mean negative log probability of the true class (floored at 1e-12) and
// argmax accuracy with ties broken toward the lowest class index.
inline ClassificationMetrics classification_metrics(const Matrix& probs, const LabelSet& truth) {
  if (truth.kind != LabelKind::classification)
    throw std::invalid_argument("classification_metrics: labels are not classification");
  if (probs.rows() != truth.num_docs())
    throw std::invalid_argument("classification_metrics: length mismatch");
  constexpr double kFloor = 1e-12;
  ClassificationMetrics m;
  int correct = 0;
  for (int d = 0; d < probs.rows(); ++d) {
    const int y = truth.classes[static_cast<std::size_t>(d)];
    if (y >= probs.cols())
      throw std::invalid_argument("classification_metrics: label outside probability columns");
    m.cross_entropy += -std::log(std::max(kFloor, probs(d, y)));
    if (argmax(probs.row(d)) == y) ++correct;
  }
  if (probs.rows() > 0) {
    m.cross_entropy /= probs.rows();
    m.accuracy = static_cast<double>(correct) / probs.rows();
  }
  return m;
}

// Words of each topic sorted by descending probability, ties by word index.
inline std::vector<std::vector<std::string>> topic_top_words(
    const Matrix& phi, const std::vector<std::string>& vocab, int n) {
  if (n > phi.cols()) throw std::invalid_argument("top-n exceeds vocabulary size");
  std::vector<std::vector<std::string>> out;
  std::vector<int> order(static_cast<std::size_t>(phi.cols()));
  for (int k = 0; k < phi.rows(); ++k) {
    std::iota(order.begin(), order.end(), 0);
    const auto row = phi.row(k);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double pa = row[static_cast<std::size_t>(a)];
      const double pb = row[static_cast<std::size_t>(b)];
      return pa != pb ? pa > pb : a < b;
    });
    std::vector<std::string> words;
    for (int i = 0; i < n; ++i)
      words.push_back(vocab[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    out.push_back(std::move(words));
  }
  return out;
}

enum class CoherenceMeasure { umass, npmi };

struct CoherenceReport {
  std::vector<double> per_topic;
  double mean = 0.0;
  int missing_words = 0;  // top words absent from the reference corpus
};

namespace detail {

// Sorted document lists per reference word, for document-frequency queries.
struct DocFrequencies {
  std::unordered_map<std::string, int> vocab_index;
  std::vector<std::vector<int>> docs_per_word;
  int num_docs = 0;

  explicit DocFrequencies(const Corpus& reference) {
    num_docs = reference.num_docs;
    for (std::size_t w = 0; w < reference.vocabulary.size(); ++w)
      vocab_index.emplace(reference.vocabulary[w], static_cast<int>(w));
    docs_per_word.resize(reference.vocabulary.size());
    for (const Entry& e : reference.entries)
      docs_per_word[static_cast<std::size_t>(e.word)].push_back(e.doc);
    for (auto& docs : docs_per_word) {
      std::sort(docs.begin(), docs.end());
      docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
    }
  }

  const std::vector<int>* docs(const std::string& word) const {
    auto it = vocab_index.find(word);
    if (it == vocab_index.end()) return nullptr;
    return &docs_per_word[static_cast<std::size_t>(it->second)];
  }

  static int intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
    int n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
      if (*ia < *ib)
        ++ia;
      else if (*ib < *ia)
        ++ib;
      else {
        ++n;
        ++ia;
        ++ib;
      }
    }
    return n;
  }
};

}  // namespace detail

// Co-occurrence coherence of each topic's top words against a reference
// corpus, whole documents as the co-occurrence unit. A word that never occurs
// in the reference gives every one of its pairs the measure's smoothed
// minimum; anything else would let two unseen words score as perfectly
// coherent under the smoothing.
//   umass: sum over ordered pairs of log((df(wi,wj) + 1) / df(wj)); minimum
//          log(1/D) when the conditioning word is absent.
//   npmi:  mean pairwise log(p(wi,wj)/(p(wi)p(wj))) / -log p(wi,wj) with
//          add-one smoothing p(.) = (df + 1)/(D + 2), bounded in [-1, 1];
//          the smoothed minimum is the never-co-occurring, always-present
//          corner df_ij = 0, df_i = df_j = D.
inline CoherenceReport coherence(const std::vector<std::vector<std::string>>& top_words,
                                 const Corpus& reference, CoherenceMeasure measure,
                                 int window = 0) {
  if (window != 0)
    throw std::invalid_argument(
        "only document-level co-occurrence (window = 0) is supported for bag-of-words input");
  detail::DocFrequencies df(reference);
  const double D = reference.num_docs;
  const double npmi_floor = [D] {
    const double pij = 1.0 / (D + 2.0);
    const double pmax = (D + 1.0) / (D + 2.0);
    return std::log(pij / (pmax * pmax)) / -std::log(pij);
  }();

  CoherenceReport report;
  for (const auto& words : top_words) {
    const int n = static_cast<int>(words.size());
    std::vector<const std::vector<int>*> docs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto* d = df.docs(words[static_cast<std::size_t>(i)]);
      if (d == nullptr || d->empty()) {
        d = nullptr;  // in the vocabulary but never observed counts as absent
        ++report.missing_words;
      }
      docs[static_cast<std::size_t>(i)] = d;
    }

    double score = 0.0;
    int pairs = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        const auto* di = docs[static_cast<std::size_t>(i)];
        const auto* dj = docs[static_cast<std::size_t>(j)];
        if (measure == CoherenceMeasure::umass) {
          if (dj == nullptr) {
            score += std::log(1.0 / D);
          } else {
            const double dfij =
                di ? static_cast<double>(detail::DocFrequencies::intersection_size(*di, *dj))
                   : 0.0;
            score += std::log((dfij + 1.0) / static_cast<double>(dj->size()));
          }
        } else {
          if (di == nullptr || dj == nullptr) {
            score += npmi_floor;
          } else {
            const double dfij =
                static_cast<double>(detail::DocFrequencies::intersection_size(*di, *dj));
            const double pij = (dfij + 1.0) / (D + 2.0);
            const double pi = (static_cast<double>(di->size()) + 1.0) / (D + 2.0);
            const double pj = (static_cast<double>(dj->size()) + 1.0) / (D + 2.0);
            score += std::log(pij / (pi * pj)) / -std::log(pij);
          }
        }
        ++pairs;
      }
    }
    if (measure == CoherenceMeasure::npmi && pairs > 0) score /= pairs;
    report.per_topic.push_back(pairs > 0 ? score : 0.0);
  }
  if (!report.per_topic.empty())
    report.mean = std::accumulate(report.per_topic.begin(), report.per_topic.end(), 0.0) /
                  static_cast<double>(report.per_topic.size());
  if (report.missing_words > 0)
    std::cerr << "warning: " << report.missing_words
              << " top word(s) absent from the coherence reference corpus\n";
  return report;
}

// Best topic alignment between two row-stochastic K x W matrices: the
// permutation minimizing mean total-variation distance, found exhaustively
// (topic counts here are small).
inline double best_permutation_mean_tv(const Matrix& phi_a, const Matrix& phi_b) {
  if (phi_a.rows() != phi_b.rows() || phi_a.cols() != phi_b.cols())
    throw std::invalid_argument("best_permutation_mean_tv: shape mismatch");
  const int K = phi_a.rows();
  if (K > 8) throw std::invalid_argument("best_permutation_mean_tv: K too large for enumeration");
  Matrix tv(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) tv(i, j) = 0.5 * l1_distance(phi_a.row(i), phi_b.row(j));
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < K; ++i) total += tv(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, total / K);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct EvalReport {
  double cross_entropy = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  std::string coherence_measure;
  std::vector<double> coherence_per_topic;
  double coherence_mean = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<std::string>> top_words;
  int top_n = 15;
  int num_docs = 0;
  int num_classes = 0;
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["num_docs"] = r.num_docs;
  j["num_classes"] = r.num_classes;
  if (std::isfinite(r.cross_entropy)) j["cross_entropy"] = r.cross_entropy;
  if (std::isfinite(r.accuracy)) j["accuracy"] = r.accuracy;
  if (!r.coherence_measure.empty()) {
    j["coherence_measure"] = r.coherence_measure;
    j["coherence_per_topic"] = r.coherence_per_topic;
    j["coherence_mean"] = r.coherence_mean;
  }
  j["top_n"] = r.top_n;
  j["top_words"] = r.top_words;
  return j;
}

inline std::string to_text(const EvalReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << "documents        " << r.num_docs << "\n";
  if (r.num_classes > 0) out << "classes          " << r.num_classes << "\n";
  if (std::isfinite(r.cross_entropy)) out << "cross-entropy    " << r.cross_entropy << "\n";
  if (std::isfinite(r.accuracy)) out << "accuracy         " << r.accuracy << "\n";
  if (!r.coherence_measure.empty())
    out << "coherence (" << r.coherence_measure << ")  mean " << r.coherence_mean << "\n";
  for (std::size_t k = 0; k < r.top_words.size(); ++k) {
    out << "topic " << (k + 1);
    if (k < r.coherence_per_topic.size()) out << "  [" << r.coherence_per_topic[k] << "]";
    out << " :";
    for (const auto& w : r.top_words[k]) out << " " << w;
    out << "\n";
  }
  return out.str();
}

inline void write_coherence_csv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out << "topic,coherence\n";
  out.precision(12);
  for (std::size_t k = 0; k < r.coherence_per_topic.size(); ++k)
    out << (k + 1) << "," << r.coherence_per_topic[k] << "\n";
}

}  // namespace nalda
