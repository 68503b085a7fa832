#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "nalda/corpus.hpp"
#include "nalda/matrix.hpp"
#include "nalda/message_state.hpp"
#include "nalda/parallel.hpp"

namespace nalda {

// Dirichlet smoothing for the two unsupervised aggregations. (0,0) is legal
// but can drive the normalizers into the uniform fallback.
struct LdaHyperParams {
  double alpha = 0.0;
  double beta = 0.0;
};

// Leave-one-out topic mass of the pair's document: everything the other words
// of d contribute, plus alpha. The cached row minus the pair's own term; tiny
// negatives from the subtraction are clamped to zero.
inline void agg_doc(const AggregateCache& cache, int d, double count,
                    std::span<const double> mu, double alpha, std::span<double> out) {
  const auto ds = cache.doc_sums.row(d);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::max(0.0, ds[k] - count * mu[k]) + alpha;
}

// Same-word counterpart: mass this word carries in every other document.
inline void agg_word(const AggregateCache& cache, int w, double count,
                     std::span<const double> mu, double beta, std::span<double> out) {
  const auto ws = cache.word_sums.row(w);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::max(0.0, ws[k] - count * mu[k]) + beta;
}

inline void na_doc(std::span<double> agg) { normalize_k(agg); }

// Word-side normalization: each component is divided by that topic's sum of
// the same aggregation over all words. The exact per-topic denominator is
//   sum_w' (word_sums[w'][k] - contribution of document d to w') + W*beta
// which collapses to total_mass[k] - doc_sums[d][k] + W*beta, because document
// d's contribution across all words is exactly doc_sums[d]. O(K) and exact.
inline void na_word(std::span<const double> agg, const AggregateCache& cache, int d_excluded,
                    double beta, std::span<double> out) {
  const int W = cache.word_sums.rows();
  const auto ds = cache.doc_sums.row(d_excluded);
  bool any_denom = false;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double denom =
        std::max(0.0, cache.total_mass[k] - ds[k]) + static_cast<double>(W) * beta;
    if (denom > kUnderflowFloor) {
      out[k] = agg[k] / denom;
      any_denom = true;
    } else {
      out[k] = 0.0;  // zero numerator over zero denominator
    }
  }
  if (!any_denom) {
    const double u = 1.0 / static_cast<double>(out.size());
    for (double& x : out) x = u;
  }
}

// One message update: normalized elementwise product of the document-side and
// word-side aggregation factors. Result is staged by the caller; the read
// state is untouched.
inline void update_pair_unsupervised(const Corpus& corpus, const AggregateCache& cache,
                                     const MessageState& state, int entry,
                                     const LdaHyperParams& hyper, std::span<double> out) {
  const Entry& e = corpus.entries[static_cast<std::size_t>(entry)];
  const auto mu = state.msg(entry);
  const int K = state.K;
  std::vector<double> nd(static_cast<std::size_t>(K));
  std::vector<double> nw(static_cast<std::size_t>(K));
  agg_doc(cache, e.doc, e.count, mu, hyper.alpha, nd);
  na_doc(nd);
  std::vector<double> aw(static_cast<std::size_t>(K));
  agg_word(cache, e.word, e.count, mu, hyper.beta, aw);
  na_word(aw, cache, e.doc, hyper.beta, nw);
  for (int k = 0; k < K; ++k)
    out[static_cast<std::size_t>(k)] =
        nd[static_cast<std::size_t>(k)] * nw[static_cast<std::size_t>(k)];
  normalize_k(out);
}

// Jacobi stage over the given entries: every new message is computed from the
// same read state. Rows of `staged` align with entry_ids.
inline void sweep_unsupervised(const Corpus& corpus, const AggregateCache& cache,
                               const MessageState& state, const LdaHyperParams& hyper,
                               const std::vector<int>& entry_ids, Matrix& staged,
                               int threads = 1) {
  staged = Matrix(static_cast<int>(entry_ids.size()), state.K);
  parallel_for(static_cast<int>(entry_ids.size()), threads, [&](int r) {
    update_pair_unsupervised(corpus, cache, state, entry_ids[static_cast<std::size_t>(r)], hyper,
                             staged.row(r));
  });
}

struct BpRunResult {
  MessageState state;
  AggregateCache cache;
  std::vector<double> sweep_deltas;  // mean per-message L1 change per sweep
};

// Plain BP-LDA: full-corpus Jacobi sweeps until the mean message change drops
// below tol or the sweep budget runs out.
inline BpRunResult run_bp_lda(const Corpus& corpus, int K, const LdaHyperParams& hyper,
                              int max_sweeps, double tol, std::uint64_t seed, int threads = 1) {
  BpRunResult result;
  result.state = init_messages(corpus, K, seed);
  result.cache = rebuild_cache(corpus, result.state);
  std::vector<int> all(static_cast<std::size_t>(corpus.num_entries()));
  std::iota(all.begin(), all.end(), 0);
  Matrix staged;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    sweep_unsupervised(corpus, result.cache, result.state, hyper, all, staged, threads);
    const double delta = mean_l1_delta(result.state, all, staged);
    result.sweep_deltas.push_back(delta);
    apply_updates(corpus, result.state, result.cache, nullptr, all, staged);
    result.cache = rebuild_cache(corpus, result.state);
    if (delta < tol) break;
  }
  return result;
}

}  // namespace nalda
