#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nalda/corpus.hpp"
#include "nalda/matrix.hpp"
#include "nalda/rng.hpp"

namespace nalda {

// Below this mass a vector is treated as all-zero and normalization falls back
// to the uniform distribution.
inline constexpr double kUnderflowFloor = 1e-300;

// In-place division by the component sum. Inputs must be nonnegative; an
// all-zero (or underflowed) input becomes uniform 1/K.
inline void normalize_k(std::span<double> v) {
  double sum = 0.0;
  for (double x : v) {
    if (x < 0.0) throw std::invalid_argument("normalize_k: negative component");
    sum += x;
  }
  if (sum <= kUnderflowFloor) {
    const double u = 1.0 / static_cast<double>(v.size());
    for (double& x : v) x = u;
    return;
  }
  for (double& x : v) x /= sum;
}

// Topic messages, one simplex vector of length K per sparse corpus entry.
// Sweeps read this buffer, stage their results elsewhere, and commit them all
// at once, so every update within a sweep sees the same iteration-t state.
struct MessageState {
  int K = 0;
  long long iteration = 0;
  std::vector<double> data;  // num_entries x K, row-major

  std::span<double> msg(int entry) {
    return {data.data() + static_cast<std::size_t>(entry) * K, static_cast<std::size_t>(K)};
  }
  std::span<const double> msg(int entry) const {
    return {data.data() + static_cast<std::size_t>(entry) * K, static_cast<std::size_t>(K)};
  }
  int num_messages() const { return K == 0 ? 0 : static_cast<int>(data.size()) / K; }
};

// Each message is K independent uniforms in (0,1) scaled onto the simplex;
// deterministic for a given seed.
inline MessageState init_messages(const Corpus& corpus, int K, std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  MessageState state;
  state.K = K;
  state.data.resize(static_cast<std::size_t>(corpus.num_entries()) * K);
  Rng rng(seed);
  for (int i = 0; i < corpus.num_entries(); ++i) {
    auto m = state.msg(i);
    for (double& x : m) x = rng.uniform01();
    normalize_k(m);
  }
  return state;
}

// Running topic-mass sums that turn the leave-one-out aggregations into O(K)
// subtractions. total_mass[k] is the corpus-wide sum (the word-normalizer
// denominator core); word_mass_totals holds the raw per-word token counts.
struct AggregateCache {
  Matrix doc_sums;                       // D x K
  Matrix word_sums;                      // W x K
  Matrix label_sums;                     // S x K (classification only, else 0x0)
  std::vector<double> total_mass;        // K
  std::vector<double> word_mass_totals;  // W

  int K() const { return doc_sums.cols(); }
};

// Full recompute from the corpus and live messages (no subtraction anywhere).
// label_sums accumulates whole doc_sums rows in ascending document order; the
// regression window sum reproduces that reduction order exactly.
inline AggregateCache rebuild_cache(const Corpus& corpus, const MessageState& state,
                                    const LabelSet* labels = nullptr) {
  if (state.num_messages() != corpus.num_entries())
    throw std::invalid_argument("rebuild_cache: state not aligned with corpus");
  const int K = state.K;
  AggregateCache cache;
  cache.doc_sums = Matrix(corpus.num_docs, K);
  cache.word_sums = Matrix(corpus.num_words, K);
  cache.total_mass.assign(static_cast<std::size_t>(K), 0.0);
  cache.word_mass_totals.assign(static_cast<std::size_t>(corpus.num_words), 0.0);

  for (int i = 0; i < corpus.num_entries(); ++i) {
    const Entry& e = corpus.entries[static_cast<std::size_t>(i)];
    const auto m = state.msg(i);
    auto ds = cache.doc_sums.row(e.doc);
    auto ws = cache.word_sums.row(e.word);
    for (int k = 0; k < K; ++k) {
      const double v = e.count * m[static_cast<std::size_t>(k)];
      ds[static_cast<std::size_t>(k)] += v;
      ws[static_cast<std::size_t>(k)] += v;
    }
    cache.word_mass_totals[static_cast<std::size_t>(e.word)] += e.count;
  }
  for (int d = 0; d < corpus.num_docs; ++d) {
    const auto ds = cache.doc_sums.row(d);
    for (int k = 0; k < K; ++k) cache.total_mass[static_cast<std::size_t>(k)] += ds[static_cast<std::size_t>(k)];
  }
  if (labels && labels->kind == LabelKind::classification && !labels->classes.empty()) {
    if (labels->num_docs() != corpus.num_docs)
      throw std::invalid_argument("rebuild_cache: labels not aligned with corpus");
    cache.label_sums = Matrix(labels->class_count, K);
    for (int d = 0; d < corpus.num_docs; ++d) {
      auto ls = cache.label_sums.row(labels->classes[static_cast<std::size_t>(d)]);
      const auto ds = cache.doc_sums.row(d);
      for (int k = 0; k < K; ++k) ls[static_cast<std::size_t>(k)] += ds[static_cast<std::size_t>(k)];
    }
  }
  return cache;
}

// Commits staged messages for the given entries and folds the deltas into the
// cache incrementally. new_msgs rows align with entry_ids.
inline void apply_updates(const Corpus& corpus, MessageState& state, AggregateCache& cache,
                          const LabelSet* labels, const std::vector<int>& entry_ids,
                          const Matrix& new_msgs) {
  const int K = state.K;
  for (std::size_t r = 0; r < entry_ids.size(); ++r) {
    const int i = entry_ids[r];
    const Entry& e = corpus.entries[static_cast<std::size_t>(i)];
    auto cur = state.msg(i);
    const auto nxt = new_msgs.row(static_cast<int>(r));
    auto ds = cache.doc_sums.row(e.doc);
    auto ws = cache.word_sums.row(e.word);
    std::span<double> ls;
    if (labels && labels->kind == LabelKind::classification && !cache.label_sums.empty())
      ls = cache.label_sums.row(labels->classes[static_cast<std::size_t>(e.doc)]);
    for (int k = 0; k < K; ++k) {
      const double delta = e.count * (nxt[static_cast<std::size_t>(k)] - cur[static_cast<std::size_t>(k)]);
      ds[static_cast<std::size_t>(k)] += delta;
      ws[static_cast<std::size_t>(k)] += delta;
      cache.total_mass[static_cast<std::size_t>(k)] += delta;
      if (!ls.empty()) ls[static_cast<std::size_t>(k)] += delta;
      cur[static_cast<std::size_t>(k)] = nxt[static_cast<std::size_t>(k)];
    }
  }
  ++state.iteration;
}

// Document-topic proportions: theta_d[k] proportional to doc mass + alpha.
inline void doc_feature(const AggregateCache& cache, int d, double alpha, std::span<double> out) {
  const auto ds = cache.doc_sums.row(d);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = ds[k] + alpha;
  normalize_k(out);
}

inline Matrix estimate_theta(const AggregateCache& cache, double alpha) {
  Matrix theta(cache.doc_sums.rows(), cache.K());
  for (int d = 0; d < theta.rows(); ++d) doc_feature(cache, d, alpha, theta.row(d));
  return theta;
}

// Topic-word distributions: phi[k][w] = (word mass + beta) / (topic mass + W*beta).
// Works from a bare W x K mass matrix so checkpoints can be queried without a
// full cache.
inline Matrix phi_from_word_mass(const Matrix& word_topic_mass, double beta) {
  const int W = word_topic_mass.rows();
  const int K = word_topic_mass.cols();
  Matrix phi(K, W);
  for (int k = 0; k < K; ++k) {
    auto row = phi.row(k);
    double mass = 0.0;
    for (int w = 0; w < W; ++w) mass += word_topic_mass(w, k);
    const double denom = mass + W * beta;
    if (denom <= kUnderflowFloor) {
      for (int w = 0; w < W; ++w) row[static_cast<std::size_t>(w)] = 1.0 / W;
      continue;
    }
    for (int w = 0; w < W; ++w)
      row[static_cast<std::size_t>(w)] = (word_topic_mass(w, k) + beta) / denom;
  }
  return phi;
}

inline Matrix estimate_phi(const AggregateCache& cache, double beta) {
  return phi_from_word_mass(cache.word_sums, beta);
}

// Mean per-message L1 distance between staged updates and the live state;
// the trainer's convergence monitor.
inline double mean_l1_delta(const MessageState& state, const std::vector<int>& entry_ids,
                            const Matrix& new_msgs) {
  if (entry_ids.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < entry_ids.size(); ++r)
    total += l1_distance(state.msg(entry_ids[r]), new_msgs.row(static_cast<int>(r)));
  return total / static_cast<double>(entry_ids.size());
}

}  // namespace nalda
