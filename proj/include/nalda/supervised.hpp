#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nalda/bp.hpp"
#include "nalda/corpus.hpp"
#include "nalda/message_state.hpp"

namespace nalda {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// x such that softplus(x) == y, for y > 0
inline double softplus_inverse(double y) {
  if (y <= 0.0) throw std::invalid_argument("softplus_inverse: y must be positive");
  return y > 30.0 ? y : y + std::log1p(-std::exp(-y));
}

// Which unsupervised factor the supervised aggregation is mixed into. `doc`
// pairs eta with the label signal against the document signal; `word` swaps
// the word factor into the mix instead and multiplies by the document factor.
enum class MixTarget { doc, word };

// The label-edge parameters. The diagonal scaling matrix is kept strictly
// positive by construction: the stored vector is free and softplus maps it to
// the diagonal, so gradient steps need no projection.
struct SupervisedParams {
  std::vector<double> ws_raw;   // K free reals; diagonal = softplus(ws_raw)
  double eta = 0.1;             // supervised mixing weight in [0,1]
  double epsilon = 0.5;         // regression neighborhood radius, > 0

  static SupervisedParams identity(int K, double eta, double epsilon = 0.5) {
    SupervisedParams p;
    p.ws_raw.assign(static_cast<std::size_t>(K), softplus_inverse(1.0));
    p.eta = eta;
    p.epsilon = epsilon;
    return p;
  }

  std::vector<double> ws_diag() const {
    std::vector<double> d(ws_raw.size());
    for (std::size_t k = 0; k < ws_raw.size(); ++k) d[k] = softplus(ws_raw[k]);
    return d;
  }
};

// Documents ordered by regression label, for epsilon-ball queries.
struct LabelWindows {
  std::vector<double> sorted_labels;
  std::vector<int> order;  // doc index per sorted position

  static LabelWindows build(const LabelSet& labels) {
    LabelWindows win;
    const int D = labels.num_docs();
    win.order.resize(static_cast<std::size_t>(D));
    for (int d = 0; d < D; ++d) win.order[static_cast<std::size_t>(d)] = d;
    std::sort(win.order.begin(), win.order.end(), [&](int a, int b) {
      const double la = labels.values[static_cast<std::size_t>(a)];
      const double lb = labels.values[static_cast<std::size_t>(b)];
      return la != lb ? la < lb : a < b;
    });
    win.sorted_labels.resize(static_cast<std::size_t>(D));
    for (int i = 0; i < D; ++i)
      win.sorted_labels[static_cast<std::size_t>(i)] =
          labels.values[static_cast<std::size_t>(win.order[static_cast<std::size_t>(i)])];
    return win;
  }

  // Documents with |label - center| < eps (strict), ascending by doc index.
  std::vector<int> gather(double center, double eps) const {
    auto lo = std::upper_bound(sorted_labels.begin(), sorted_labels.end(), center - eps);
    auto hi = std::lower_bound(sorted_labels.begin(), sorted_labels.end(), center + eps);
    std::vector<int> docs(order.begin() + (lo - sorted_labels.begin()),
                          order.begin() + (hi - sorted_labels.begin()));
    std::sort(docs.begin(), docs.end());
    return docs;
  }
};

// Topic mass of all other documents sharing d's label (classification) or
// lying inside the epsilon-ball around d's value (regression). Both routes
// sum whole doc_sums rows in ascending document order and then subtract d's,
// so integer regression labels with eps=0.5 reproduce the classification
// result bitwise.
inline void agg_super(const AggregateCache& cache, const LabelSet& labels,
                      const LabelWindows* windows, int d, const SupervisedParams& params,
                      std::span<double> out) {
  const std::size_t K = out.size();
  if (labels.kind == LabelKind::classification) {
    if (cache.label_sums.empty())
      throw std::invalid_argument("agg_super: cache built without label sums");
    const auto ls = cache.label_sums.row(labels.classes[static_cast<std::size_t>(d)]);
    const auto ds = cache.doc_sums.row(d);
    for (std::size_t k = 0; k < K; ++k) out[k] = std::max(0.0, ls[k] - ds[k]);
    return;
  }
  if (!windows) throw std::invalid_argument("agg_super: regression requires label windows");
  const auto ball = windows->gather(labels.values[static_cast<std::size_t>(d)], params.epsilon);
  std::fill(out.begin(), out.end(), 0.0);
  for (int other : ball) {
    const auto ds = cache.doc_sums.row(other);
    for (std::size_t k = 0; k < K; ++k) out[k] += ds[k];
  }
  const auto own = cache.doc_sums.row(d);
  for (std::size_t k = 0; k < K; ++k) out[k] = std::max(0.0, out[k] - own[k]);
}

// Norm_K of the diagonally scaled supervised aggregation. A zero aggregation
// (document alone with its label) falls back to uniform.
inline void na_super(std::span<const double> agg, std::span<const double> ws_diag,
                     std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = ws_diag[k] * agg[k];
  normalize_k(out);
}

// Convex combination of the supervised and unsupervised signals; both inputs
// are on the simplex so the result needs no renormalization.
inline void mix_doc_signal(std::span<const double> na_s, std::span<const double> na_d, double eta,
                           std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = eta * na_s[k] + (1.0 - eta) * na_d[k];
}

// Message update with label edges. eta == 0 short-circuits to the unsupervised
// update (bitwise identical, and valid for unlabeled corpora).
inline void update_pair_supervised(const Corpus& corpus, const AggregateCache& cache,
                                   const MessageState& state, int entry,
                                   const LdaHyperParams& hyper, const LabelSet* labels,
                                   const LabelWindows* windows, const SupervisedParams& params,
                                   MixTarget target, std::span<double> out) {
  if (params.eta == 0.0 || labels == nullptr) {
    update_pair_unsupervised(corpus, cache, state, entry, hyper, out);
    return;
  }
  const Entry& e = corpus.entries[static_cast<std::size_t>(entry)];
  const auto mu = state.msg(entry);
  const int K = state.K;
  std::vector<double> nd(static_cast<std::size_t>(K)), nw(static_cast<std::size_t>(K)),
      ns(static_cast<std::size_t>(K)), aggs(static_cast<std::size_t>(K)),
      mix(static_cast<std::size_t>(K));

  agg_doc(cache, e.doc, e.count, mu, hyper.alpha, nd);
  na_doc(nd);
  std::vector<double> aw(static_cast<std::size_t>(K));
  agg_word(cache, e.word, e.count, mu, hyper.beta, aw);
  na_word(aw, cache, e.doc, hyper.beta, nw);

  agg_super(cache, *labels, windows, e.doc, params, aggs);
  const auto ws = params.ws_diag();
  na_super(aggs, ws, ns);

  if (target == MixTarget::doc) {
    mix_doc_signal(ns, nd, params.eta, mix);
    for (int k = 0; k < K; ++k)
      out[static_cast<std::size_t>(k)] =
          mix[static_cast<std::size_t>(k)] * nw[static_cast<std::size_t>(k)];
  } else {
    mix_doc_signal(ns, nw, params.eta, mix);
    for (int k = 0; k < K; ++k)
      out[static_cast<std::size_t>(k)] =
          mix[static_cast<std::size_t>(k)] * nd[static_cast<std::size_t>(k)];
  }
  normalize_k(out);
}

}  // namespace nalda
