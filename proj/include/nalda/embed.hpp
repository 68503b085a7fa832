#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nalda/embeddings.hpp"
#include "nalda/matrix.hpp"
#include "nalda/rng.hpp"
#include "nalda/supervised.hpp"

namespace nalda {

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// The K x E transform turning a pre-trained word vector into a topic-simplex
// factor u = Norm_K(sigmoid(wc * v)).
struct EmbedParams {
  Matrix wc;  // K x E

  // Near-zero start: u begins near uniform, so the embedding influence fades
  // in only as the transform is learned.
  static EmbedParams init(int K, int E, std::uint64_t seed) {
    EmbedParams p;
    p.wc = Matrix(K, E);
    Rng rng(seed);
    for (double& x : p.wc.data()) x = rng.uniform(-0.05, 0.05);
    return p;
  }

  bool enabled() const { return wc.cols() > 0; }
};

// Topic factor of one vocabulary word. Words without an embedding row get the
// uniform vector, which the final Norm_K cancels out.
inline void embed_factor(const EmbedParams& params, const EmbeddingTable& table, int word,
                         std::span<double> out) {
  const int K = static_cast<int>(out.size());
  if (!params.enabled() || !table.has_row(word)) {
    const double u = 1.0 / K;
    for (double& x : out) x = u;
    return;
  }
  const auto v = table.vec(word);
  for (int k = 0; k < K; ++k) {
    double z = 0.0;
    const auto row = params.wc.row(k);
    for (std::size_t e = 0; e < v.size(); ++e) z += row[e] * v[e];
    out[static_cast<std::size_t>(k)] = sigmoid(z);
  }
  normalize_k(out);
}

// Per-sweep table of u vectors, one per vocabulary word. u depends only on the
// word and on wc, so it is refreshed once per parameter step, not per pair.
// uniform[w] marks rows that are exactly the uniform vector (missing
// embeddings, or a transform that lands on it); multiplying by such a row is
// skipped so the full update degrades bitwise to the supervised one.
struct UTable {
  Matrix u;                    // W x K
  std::vector<char> uniform;   // W

  static UTable build(const EmbedParams& params, const EmbeddingTable* table, int W, int K) {
    UTable t;
    t.u = Matrix(W, K, 1.0 / K);
    t.uniform.assign(static_cast<std::size_t>(W), 1);
    if (!params.enabled() || table == nullptr) return t;
    const double flat = 1.0 / K;
    for (int w = 0; w < W; ++w) {
      auto row = t.u.row(w);
      embed_factor(params, *table, w, row);
      bool is_flat = true;
      for (double x : row)
        if (x != flat) {
          is_flat = false;
          break;
        }
      t.uniform[static_cast<std::size_t>(w)] = is_flat ? 1 : 0;
    }
    return t;
  }
};

// Intermediates of one full update, captured when the caller needs to
// differentiate through it.
struct FullUpdateTrace {
  std::vector<double> na_d, na_w, na_s, agg_s, mix, product;
  double product_sum = 0.0;   // pre-normalization mass; 0 marks the uniform fallback
  double na_s_sum = 0.0;      // pre-normalization mass of ws ⊙ agg_s; 0 marks fallback
  bool used_supervised = false;
  bool used_u = false;
};

// The complete message update: topic factor of the word, eta-mixed supervised
// and document signals, word factor, normalized product.
inline void update_pair_full(const Corpus& corpus, const AggregateCache& cache,
                             const MessageState& state, int entry, const LdaHyperParams& hyper,
                             const LabelSet* labels, const LabelWindows* windows,
                             const SupervisedParams& sup, const UTable& utable, MixTarget target,
                             std::span<double> out, FullUpdateTrace* trace = nullptr) {
  const Entry& e = corpus.entries[static_cast<std::size_t>(entry)];
  const int K = state.K;
  const bool flat_u = utable.uniform[static_cast<std::size_t>(e.word)] != 0;

  if (flat_u && trace == nullptr) {
    update_pair_supervised(corpus, cache, state, entry, hyper, labels, windows, sup, target, out);
    return;
  }

  const auto mu = state.msg(entry);
  std::vector<double> nd(static_cast<std::size_t>(K)), nw(static_cast<std::size_t>(K)),
      ns(static_cast<std::size_t>(K)), aggs(static_cast<std::size_t>(K)),
      mix(static_cast<std::size_t>(K));

  agg_doc(cache, e.doc, e.count, mu, hyper.alpha, nd);
  na_doc(nd);
  std::vector<double> aw(static_cast<std::size_t>(K));
  agg_word(cache, e.word, e.count, mu, hyper.beta, aw);
  na_word(aw, cache, e.doc, hyper.beta, nw);

  const bool supervised = sup.eta != 0.0 && labels != nullptr;
  double ns_sum = 0.0;
  if (supervised) {
    agg_super(cache, *labels, windows, e.doc, sup, aggs);
    const auto ws = sup.ws_diag();
    for (int k = 0; k < K; ++k)
      ns[static_cast<std::size_t>(k)] =
          ws[static_cast<std::size_t>(k)] * aggs[static_cast<std::size_t>(k)];
    for (double x : ns) ns_sum += x;
    if (ns_sum <= kUnderflowFloor) {
      const double u = 1.0 / K;
      for (double& x : ns) x = u;
      ns_sum = 0.0;
    } else {
      for (double& x : ns) x /= ns_sum;
    }
  }

  const std::span<const double> mix_with = target == MixTarget::doc ? std::span<const double>(nd)
                                                                    : std::span<const double>(nw);
  const std::span<const double> other = target == MixTarget::doc ? std::span<const double>(nw)
                                                                 : std::span<const double>(nd);
  if (supervised)
    mix_doc_signal(ns, mix_with, sup.eta, mix);
  else
    std::copy(mix_with.begin(), mix_with.end(), mix.begin());

  const auto u_row = utable.u.row(e.word);
  std::vector<double> product(static_cast<std::size_t>(K));
  double psum = 0.0;
  for (int k = 0; k < K; ++k) {
    double q = mix[static_cast<std::size_t>(k)] * other[static_cast<std::size_t>(k)];
    if (!flat_u) q *= u_row[static_cast<std::size_t>(k)];
    product[static_cast<std::size_t>(k)] = q;
    psum += q;
  }
  if (psum <= kUnderflowFloor) {
    const double u = 1.0 / K;
    for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(k)] = u;
    psum = 0.0;
  } else {
    for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(k)] = product[static_cast<std::size_t>(k)] / psum;
  }

  if (trace) {
    trace->na_d.assign(nd.begin(), nd.end());
    trace->na_w.assign(nw.begin(), nw.end());
    trace->na_s.assign(ns.begin(), ns.end());
    trace->agg_s.assign(aggs.begin(), aggs.end());
    trace->mix.assign(mix.begin(), mix.end());
    trace->product = std::move(product);
    trace->product_sum = psum;
    trace->na_s_sum = ns_sum;
    trace->used_supervised = supervised;
    trace->used_u = !flat_u;
  }
}

}  // namespace nalda
