#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nalda/bp.hpp"
#include "nalda/corpus.hpp"
#include "nalda/embed.hpp"
#include "nalda/embeddings.hpp"
#include "nalda/head.hpp"
#include "nalda/matrix.hpp"
#include "nalda/message_state.hpp"
#include "nalda/parallel.hpp"
#include "nalda/rng.hpp"
#include "nalda/supervised.hpp"

namespace nalda {

// Whether the supervised loss is differentiated through one unrolled message
// update, giving the embedding transform and the label scaling their data
// gradients. `none` leaves them with the L2 pull only.
enum class GradPath { unroll1, none };

struct Model {
  int K = 0;
  LdaHyperParams lda;
  SupervisedParams sup;
  EmbedParams emb;  // empty wc disables the embedding factor
  HeadParams head;
  bool head_enabled = false;
  MixTarget mix_target = MixTarget::doc;
};

struct TrainConfig {
  int K = 20;
  double alpha = -1.0;  // < 0 resolves to 50/K
  double beta = 0.01;
  double eta = 0.1;
  double epsilon = 0.5;
  int pairs_per_round = 5000;
  double learning_rate = 0.05;
  double l2_ws_wc = 0.001;
  int rounds = 200;
  double convergence_tol = 1e-4;
  std::uint64_t seed = 0;
  int h1 = 50;
  int h2 = 50;
  double dropout_p = 0.5;
  MixTarget mix_target = MixTarget::doc;
  GradPath grad_path = GradPath::unroll1;
  int threads = 0;  // 0 = all available cores
  int plateau_patience = 20;

  double resolved_alpha() const { return alpha < 0.0 ? 50.0 / K : alpha; }
};

// Seed streams drawn off the user seed; fixed so schedules can be reproduced
// outside the trainer.
enum : std::uint64_t {
  kSeedMessages = 1,
  kSeedHead = 2,
  kSeedEmbed = 3,
  kSeedSampling = 4,
  kSeedDropout = 5,
};

struct RoundLogEntry {
  int round = 0;
  double mean_message_delta = 0.0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double learning_rate = 0.0;
  double wall_ms = 0.0;
};

// One round's sampled pairs, the distinct documents they touch, and the
// dropout masks those documents will use. Pairs are ascending, hence grouped
// by document; doc_pair_begin delimits each document's run.
struct RoundBatch {
  std::vector<int> pair_ids;
  std::vector<int> docs;
  std::vector<int> doc_pair_begin;  // size docs.size() + 1
  BatchMasks masks;

  static RoundBatch make(const Corpus& corpus, std::vector<int> pair_ids, const HeadParams* head,
                         Rng* dropout_rng) {
    RoundBatch b;
    b.pair_ids = std::move(pair_ids);
    b.doc_pair_begin.push_back(0);
    int last_doc = -1;
    for (std::size_t r = 0; r < b.pair_ids.size(); ++r) {
      const int d = corpus.entries[static_cast<std::size_t>(b.pair_ids[r])].doc;
      if (d != last_doc) {
        if (last_doc >= 0) b.doc_pair_begin.push_back(static_cast<int>(r));
        b.docs.push_back(d);
        last_doc = d;
      }
    }
    b.doc_pair_begin.push_back(static_cast<int>(b.pair_ids.size()));
    if (head && dropout_rng)
      b.masks = BatchMasks::draw(static_cast<int>(b.docs.size()), head->h1(), head->h2(),
                                 head->dropout_p, *dropout_rng);
    return b;
  }
};

struct RoundGrads {
  HeadGrads head;
  Matrix dwc;                   // K x E
  std::vector<double> dws_raw;  // K
};

struct RoundResult {
  Matrix staged;  // |pairs| x K messages computed from the frozen read state
  Matrix theta;   // |docs| x K features fed to the head
  double loss = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

// One alternation step, evaluated as a pure function of (read state, cache,
// parameters, batch): stage the sampled messages with the full update, fold
// them into the touched documents' features, run the head, and - when asked -
// backpropagate through that single unrolled update so wc and ws_raw receive
// data gradients. Finite-difference checks drive this same function.
inline RoundResult run_round(const Corpus& corpus, const LabelSet* labels,
                             const LabelWindows* windows, const EmbeddingTable* table,
                             const AggregateCache& cache, const MessageState& state,
                             const Model& model, const UTable& utable, const RoundBatch& batch,
                             GradPath grad_path, RoundGrads* grads, int threads = 1) {
  const int K = model.K;
  const int P = static_cast<int>(batch.pair_ids.size());
  const int B = static_cast<int>(batch.docs.size());
  const double alpha = model.lda.alpha;
  const bool want_grads = grads != nullptr;

  RoundResult res;
  res.staged = Matrix(P, K);

  // Stage all sampled messages from the same iteration-t state, keeping the
  // update intermediates we will differentiate through.
  Matrix tr_mix, tr_other, tr_nas, tr_aggs;
  std::vector<double> tr_psum, tr_nssum;
  std::vector<char> tr_sup, tr_flat;
  if (want_grads) {
    tr_mix = Matrix(P, K);
    tr_other = Matrix(P, K);
    tr_nas = Matrix(P, K);
    tr_aggs = Matrix(P, K);
    tr_psum.assign(static_cast<std::size_t>(P), 0.0);
    tr_nssum.assign(static_cast<std::size_t>(P), 0.0);
    tr_sup.assign(static_cast<std::size_t>(P), 0);
    tr_flat.assign(static_cast<std::size_t>(P), 0);
  }

  parallel_for(P, threads, [&](int r) {
    const int entry = batch.pair_ids[static_cast<std::size_t>(r)];
    if (!want_grads) {
      update_pair_full(corpus, cache, state, entry, model.lda, labels, windows, model.sup, utable,
                       model.mix_target, res.staged.row(r));
      return;
    }
    FullUpdateTrace trace;
    update_pair_full(corpus, cache, state, entry, model.lda, labels, windows, model.sup, utable,
                     model.mix_target, res.staged.row(r), &trace);
    auto copy_row = [K](Matrix& m, int row, const std::vector<double>& src) {
      auto dst = m.row(row);
      for (int k = 0; k < K; ++k) dst[static_cast<std::size_t>(k)] = src[static_cast<std::size_t>(k)];
    };
    copy_row(tr_mix, r, trace.mix);
    copy_row(tr_other, r, model.mix_target == MixTarget::doc ? trace.na_w : trace.na_d);
    copy_row(tr_nas, r, trace.na_s);
    copy_row(tr_aggs, r, trace.agg_s);
    tr_psum[static_cast<std::size_t>(r)] = trace.product_sum;
    tr_nssum[static_cast<std::size_t>(r)] = trace.na_s_sum;
    tr_sup[static_cast<std::size_t>(r)] = trace.used_supervised ? 1 : 0;
    tr_flat[static_cast<std::size_t>(r)] = trace.used_u ? 0 : 1;
  });

  if (!model.head_enabled || labels == nullptr) return res;

  // Features of the touched documents, with the staged messages folded in on
  // top of the iteration-t cache.
  res.theta = Matrix(B, K);
  std::vector<double> theta_denom(static_cast<std::size_t>(B), 0.0);
  for (int b = 0; b < B; ++b) {
    const int d = batch.docs[static_cast<std::size_t>(b)];
    auto th = res.theta.row(b);
    const auto ds = cache.doc_sums.row(d);
    for (int k = 0; k < K; ++k) th[static_cast<std::size_t>(k)] = ds[static_cast<std::size_t>(k)];
    for (int r = batch.doc_pair_begin[static_cast<std::size_t>(b)];
         r < batch.doc_pair_begin[static_cast<std::size_t>(b) + 1]; ++r) {
      const int entry = batch.pair_ids[static_cast<std::size_t>(r)];
      const double x = corpus.entries[static_cast<std::size_t>(entry)].count;
      const auto old_mu = state.msg(entry);
      const auto new_mu = res.staged.row(r);
      for (int k = 0; k < K; ++k)
        th[static_cast<std::size_t>(k)] +=
            x * (new_mu[static_cast<std::size_t>(k)] - old_mu[static_cast<std::size_t>(k)]);
    }
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      th[static_cast<std::size_t>(k)] = std::max(0.0, th[static_cast<std::size_t>(k)]) + alpha;
      sum += th[static_cast<std::size_t>(k)];
    }
    if (sum <= kUnderflowFloor) {
      for (int k = 0; k < K; ++k) th[static_cast<std::size_t>(k)] = 1.0 / K;
      theta_denom[static_cast<std::size_t>(b)] = 0.0;  // constant feature: no gradient
    } else {
      for (int k = 0; k < K; ++k) th[static_cast<std::size_t>(k)] /= sum;
      theta_denom[static_cast<std::size_t>(b)] = sum;
    }
  }

  // Head loss and gradients.
  HeadGrads head_grads;
  Matrix dfeatures;
  Matrix probs;
  if (labels->kind == LabelKind::classification) {
    std::vector<int> batch_labels(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
      batch_labels[static_cast<std::size_t>(b)] =
          labels->classes[static_cast<std::size_t>(batch.docs[static_cast<std::size_t>(b)])];
    res.loss = loss_and_grads_classification(model.head, res.theta, batch_labels,
                                             model.head.dropout_p > 0.0 ? &batch.masks : nullptr,
                                             head_grads, dfeatures, &probs);
    int correct = 0;
    for (int b = 0; b < B; ++b)
      if (argmax(probs.row(b)) == batch_labels[static_cast<std::size_t>(b)]) ++correct;
    res.accuracy = B > 0 ? static_cast<double>(correct) / B : 0.0;
  } else {
    std::vector<double> batch_targets(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
      batch_targets[static_cast<std::size_t>(b)] =
          labels->values[static_cast<std::size_t>(batch.docs[static_cast<std::size_t>(b)])];
    res.loss = loss_and_grads_regression(model.head, res.theta, batch_targets,
                                         model.head.dropout_p > 0.0 ? &batch.masks : nullptr,
                                         head_grads, dfeatures, nullptr);
  }

  if (!want_grads) return res;
  grads->head = std::move(head_grads);
  grads->dwc = Matrix(model.emb.wc.rows(), model.emb.wc.cols());
  grads->dws_raw.assign(static_cast<std::size_t>(K), 0.0);
  if (grad_path == GradPath::none) return res;

  // d(loss)/d(new message) via the feature normalization, then back through
  // the unrolled update into the u factors and the supervised scaling.
  const bool emb_on = model.emb.enabled() && table != nullptr;
  std::map<int, std::vector<double>> du_by_word;
  std::vector<double> dmu(static_cast<std::size_t>(K));
  std::vector<double> dws_acc(static_cast<std::size_t>(K), 0.0);

  for (int b = 0; b < B; ++b) {
    const double denom = theta_denom[static_cast<std::size_t>(b)];
    if (denom == 0.0) continue;
    const auto th = res.theta.row(b);
    const auto df = dfeatures.row(b);
    double inner = 0.0;
    for (int k = 0; k < K; ++k)
      inner += df[static_cast<std::size_t>(k)] * th[static_cast<std::size_t>(k)];

    for (int r = batch.doc_pair_begin[static_cast<std::size_t>(b)];
         r < batch.doc_pair_begin[static_cast<std::size_t>(b) + 1]; ++r) {
      const int entry = batch.pair_ids[static_cast<std::size_t>(r)];
      const Entry& e = corpus.entries[static_cast<std::size_t>(entry)];
      const double psum = tr_psum[static_cast<std::size_t>(r)];
      if (psum == 0.0) continue;  // update hit the uniform fallback: constant

      // dL/d(mu_new)
      for (int k = 0; k < K; ++k)
        dmu[static_cast<std::size_t>(k)] =
            e.count * (df[static_cast<std::size_t>(k)] - inner) / denom;

      // back through the final Norm_K
      const auto mu_new = res.staged.row(r);
      double dot = 0.0;
      for (int k = 0; k < K; ++k)
        dot += dmu[static_cast<std::size_t>(k)] * mu_new[static_cast<std::size_t>(k)];

      const auto mix = tr_mix.row(r);
      const auto other = tr_other.row(r);
      const bool flat_u = tr_flat[static_cast<std::size_t>(r)] != 0;
      const auto u_row = utable.u.row(e.word);
      const bool word_has_grad = emb_on && table->has_row(e.word);

      std::vector<double>* du = nullptr;
      if (word_has_grad) {
        auto [it, inserted] = du_by_word.try_emplace(e.word);
        if (inserted) it->second.assign(static_cast<std::size_t>(K), 0.0);
        du = &it->second;
      }

      std::vector<double> dmix(static_cast<std::size_t>(K));
      for (int k = 0; k < K; ++k) {
        const double dprod =
            (dmu[static_cast<std::size_t>(k)] - dot) / psum;  // dL/d(stored product[k])
        // The stored product omits an exactly-uniform u, so the chain to u
        // regains the 1/K factor; the chain to mix sees u only when it was
        // actually multiplied in.
        if (du)
          (*du)[static_cast<std::size_t>(k)] +=
              dprod * mix[static_cast<std::size_t>(k)] * other[static_cast<std::size_t>(k)] *
              (flat_u ? static_cast<double>(K) : 1.0);
        dmix[static_cast<std::size_t>(k)] =
            dprod * other[static_cast<std::size_t>(k)] *
            (flat_u ? 1.0 : u_row[static_cast<std::size_t>(k)]);
      }

      if (tr_sup[static_cast<std::size_t>(r)] != 0) {
        const double ns_sum = tr_nssum[static_cast<std::size_t>(r)];
        if (ns_sum != 0.0) {
          const auto nas = tr_nas.row(r);
          const auto aggs = tr_aggs.row(r);
          double sdot = 0.0;
          for (int k = 0; k < K; ++k)
            sdot += model.sup.eta * dmix[static_cast<std::size_t>(k)] *
                    nas[static_cast<std::size_t>(k)];
          for (int k = 0; k < K; ++k) {
            const double dr =
                (model.sup.eta * dmix[static_cast<std::size_t>(k)] - sdot) / ns_sum;
            dws_acc[static_cast<std::size_t>(k)] += dr * aggs[static_cast<std::size_t>(k)];
          }
        }
      }
    }
  }

  for (int k = 0; k < K; ++k)
    grads->dws_raw[static_cast<std::size_t>(k)] =
        dws_acc[static_cast<std::size_t>(k)] *
        sigmoid(model.sup.ws_raw[static_cast<std::size_t>(k)]);

  // Per-word u gradients into the embedding transform.
  for (const auto& [word, du] : du_by_word) {
    const auto u = utable.u.row(word);
    const auto v = table->vec(word);
    std::vector<double> s(static_cast<std::size_t>(K));
    double ssum = 0.0;
    for (int k = 0; k < K; ++k) {
      double z = 0.0;
      const auto row = model.emb.wc.row(k);
      for (std::size_t e = 0; e < v.size(); ++e) z += row[e] * v[e];
      s[static_cast<std::size_t>(k)] = sigmoid(z);
      ssum += s[static_cast<std::size_t>(k)];
    }
    if (ssum <= kUnderflowFloor) continue;
    double udot = 0.0;
    for (int k = 0; k < K; ++k)
      udot += du[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(k)];
    for (int k = 0; k < K; ++k) {
      const double ds = (du[static_cast<std::size_t>(k)] - udot) / ssum;
      const double dz = ds * s[static_cast<std::size_t>(k)] * (1.0 - s[static_cast<std::size_t>(k)]);
      auto grow = grads->dwc.row(k);
      for (std::size_t e = 0; e < v.size(); ++e) grow[e] += dz * v[e];
    }
  }
  return res;
}

// One SGD step. The L2 pull on wc and ws_raw is applied as an exact decay
// factor (1 - 2*l2*lr); head parameters carry no weight decay (dropout is
// their regularizer).
inline void sgd_step(Model& model, const RoundGrads& grads, double lr, double l2) {
  const double decay = 1.0 - 2.0 * l2 * lr;
  for (std::size_t k = 0; k < model.sup.ws_raw.size(); ++k)
    model.sup.ws_raw[k] = model.sup.ws_raw[k] * decay - lr * grads.dws_raw[k];
  if (model.emb.enabled()) {
    auto& wc = model.emb.wc.data();
    const auto& dwc = grads.dwc.data();
    for (std::size_t i = 0; i < wc.size(); ++i) wc[i] = wc[i] * decay - lr * dwc[i];
  }
  if (model.head_enabled) {
    auto step = [lr](Matrix& p, const Matrix& g) {
      auto& pd = p.data();
      const auto& gd = g.data();
      for (std::size_t i = 0; i < pd.size(); ++i) pd[i] -= lr * gd[i];
    };
    auto step_vec = [lr](std::vector<double>& p, const std::vector<double>& g) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    };
    step(model.head.s_a, grads.head.s_a);
    step_vec(model.head.t_a, grads.head.t_a);
    step(model.head.s_b, grads.head.s_b);
    step_vec(model.head.t_b, grads.head.t_b);
    step(model.head.s_c, grads.head.s_c);
    step_vec(model.head.t_c, grads.head.t_c);
  }
}

struct TrainResult {
  Model model;
  MessageState state;
  AggregateCache cache;
  std::vector<RoundLogEntry> log;
};

// Alternating optimization: per round, (a) stage and commit the sampled
// messages, (b) one SGD step on every parameter from the unrolled loss. The
// cache is rebuilt from scratch after each round to bound incremental drift.
// Without labels this degrades to sampled BP-LDA sweeps (eta 0, no head, no u).
inline TrainResult train(const Corpus& corpus, const LabelSet* labels,
                         const EmbeddingTable* table, const TrainConfig& cfg) {
  if (cfg.K < 1) throw std::invalid_argument("topics must be >= 1");
  if (cfg.pairs_per_round < 1) throw std::invalid_argument("pairs-per-round must be >= 1");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  if (cfg.eta < 0.0 || cfg.eta > 1.0) throw std::invalid_argument("eta must lie in [0,1]");
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
  if (labels && labels->num_docs() != corpus.num_docs)
    throw std::invalid_argument("labels not aligned with corpus");

  TrainResult out;
  Model& model = out.model;
  model.K = cfg.K;
  model.lda.alpha = cfg.resolved_alpha();
  model.lda.beta = cfg.beta;
  model.mix_target = cfg.mix_target;
  model.sup = SupervisedParams::identity(cfg.K, labels ? cfg.eta : 0.0, cfg.epsilon);

  const bool emb_on = labels != nullptr && table != nullptr && table->dim > 0;
  if (emb_on) model.emb = EmbedParams::init(cfg.K, table->dim, derive_seed(cfg.seed, kSeedEmbed));
  if (labels) {
    const int S = labels->kind == LabelKind::classification ? labels->class_count : 1;
    model.head = HeadParams::init(cfg.K, cfg.h1, cfg.h2, S, cfg.dropout_p,
                                  derive_seed(cfg.seed, kSeedHead));
    model.head_enabled = true;
  }

  std::optional<LabelWindows> windows;
  if (labels && labels->kind == LabelKind::regression) windows = LabelWindows::build(*labels);

  out.state = init_messages(corpus, cfg.K, derive_seed(cfg.seed, kSeedMessages));
  out.cache = rebuild_cache(corpus, out.state, labels);

  Rng sample_rng(derive_seed(cfg.seed, kSeedSampling));
  Rng dropout_rng(derive_seed(cfg.seed, kSeedDropout));
  UTable utable = UTable::build(model.emb, emb_on ? table : nullptr, corpus.num_words, cfg.K);

  double lr = cfg.learning_rate;
  // Plateau detection runs on a 10-round moving average so dropout noise in
  // the per-round loss cannot trigger spurious halving.
  std::vector<double> loss_window;
  double best_smoothed = std::numeric_limits<double>::infinity();
  int plateau = 0;

  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    auto pair_ids =
        sample_rng.sample_without_replacement(corpus.num_entries(), cfg.pairs_per_round);
    RoundBatch batch = RoundBatch::make(corpus, std::move(pair_ids), labels ? &model.head : nullptr,
                                        labels ? &dropout_rng : nullptr);

    RoundGrads grads;
    RoundResult rr = run_round(corpus, labels, windows ? &*windows : nullptr,
                               emb_on ? table : nullptr, out.cache, out.state, model, utable,
                               batch, cfg.grad_path, labels ? &grads : nullptr, cfg.threads);

    const double delta = mean_l1_delta(out.state, batch.pair_ids, rr.staged);
    apply_updates(corpus, out.state, out.cache, labels, batch.pair_ids, rr.staged);

    if (labels) {
      sgd_step(model, grads, lr, cfg.l2_ws_wc);
      if (emb_on) utable = UTable::build(model.emb, table, corpus.num_words, cfg.K);
    }
    out.cache = rebuild_cache(corpus, out.state, labels);

    RoundLogEntry entry;
    entry.round = round;
    entry.mean_message_delta = delta;
    entry.train_loss = rr.loss;
    entry.train_accuracy = rr.accuracy;
    entry.learning_rate = lr;
    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
    out.log.push_back(entry);

    if (labels && std::isfinite(rr.loss)) {
      loss_window.push_back(rr.loss);
      if (loss_window.size() > 10) loss_window.erase(loss_window.begin());
      if (loss_window.size() == 10) {
        const double smoothed =
            std::accumulate(loss_window.begin(), loss_window.end(), 0.0) / 10.0;
        if (smoothed < best_smoothed - 1e-9) {
          best_smoothed = smoothed;
          plateau = 0;
        } else if (++plateau >= cfg.plateau_patience) {
          lr *= 0.5;
          plateau = 0;
        }
      }
    }
    if (delta < cfg.convergence_tol) break;
  }
  return out;
}

struct InferOptions {
  int sweep_cap = 50;
  double convergence_tol = 1e-4;
  bool ablate_embeddings = false;
  int threads = 0;  // 0 = all available cores
  std::uint64_t seed = 0;
};

struct HeldoutResult {
  Matrix output;  // class probabilities (B x S), regression scores (B x 1), or empty
  Matrix theta;   // B x K document features
  int unseen_words = 0;
};

// Held-out inference: per-document message passing against the frozen model.
// The word-side factor comes from the trained word-topic mass (zero rows for
// words unseen in training, where only the embedding factor carries signal),
// eta is forced to 0 because held-out documents have no label edges, and the
// head runs without dropout. Documents are mutually independent.
inline HeldoutResult infer_heldout(const Corpus& heldout, const EmbeddingTable* table,
                                   const Model& model, const Matrix& word_topic_mass,
                                   const InferOptions& opts) {
  const int K = model.K;
  const int W = heldout.num_words;
  const double alpha = model.lda.alpha;
  const double beta = model.lda.beta;

  HeldoutResult res;
  res.theta = Matrix(heldout.num_docs, K);

  // Frozen word factor: trained mass normalized per topic over this corpus's
  // vocabulary. Rows beyond the trained vocabulary are zero mass.
  std::vector<double> topic_mass(static_cast<std::size_t>(K), 0.0);
  for (int w = 0; w < word_topic_mass.rows(); ++w) {
    const auto row = word_topic_mass.row(w);
    for (int k = 0; k < K; ++k) topic_mass[static_cast<std::size_t>(k)] += row[static_cast<std::size_t>(k)];
  }
  Matrix word_factor(W, K);
  for (int w = 0; w < W; ++w) {
    auto wf = word_factor.row(w);
    const bool trained = w < word_topic_mass.rows();
    for (int k = 0; k < K; ++k) {
      const double mass = trained ? word_topic_mass(w, k) : 0.0;
      const double denom = topic_mass[static_cast<std::size_t>(k)] + W * beta;
      wf[static_cast<std::size_t>(k)] = denom > kUnderflowFloor ? (mass + beta) / denom : 0.0;
    }
  }
  for (const Entry& e : heldout.entries)
    if (e.word >= word_topic_mass.rows()) {
      ++res.unseen_words;
    }

  const bool emb_on = model.emb.enabled() && table != nullptr && !opts.ablate_embeddings;
  UTable utable = UTable::build(model.emb, emb_on ? table : nullptr, W, K);

  parallel_for(heldout.num_docs, opts.threads, [&](int d) {
    const int begin = heldout.doc_begin[static_cast<std::size_t>(d)];
    const int end = heldout.doc_begin[static_cast<std::size_t>(d) + 1];
    const int n = end - begin;
    Matrix mu(n, K);
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(d)));
    for (int i = 0; i < n; ++i) {
      auto m = mu.row(i);
      for (double& x : m) x = rng.uniform01();
      normalize_k(m);
    }
    std::vector<double> doc_sum(static_cast<std::size_t>(K), 0.0);
    auto rebuild_doc_sum = [&] {
      std::fill(doc_sum.begin(), doc_sum.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        const double x = heldout.entries[static_cast<std::size_t>(begin + i)].count;
        const auto m = mu.row(i);
        for (int k = 0; k < K; ++k) doc_sum[static_cast<std::size_t>(k)] += x * m[static_cast<std::size_t>(k)];
      }
    };
    rebuild_doc_sum();

    Matrix staged(n, K);
    for (int sweep = 0; sweep < opts.sweep_cap && n > 0; ++sweep) {
      for (int i = 0; i < n; ++i) {
        const Entry& e = heldout.entries[static_cast<std::size_t>(begin + i)];
        const auto m = mu.row(i);
        auto out = staged.row(i);
        double sum = 0.0;
        const auto wf = word_factor.row(e.word);
        const auto u_row = utable.u.row(e.word);
        const bool flat = utable.uniform[static_cast<std::size_t>(e.word)] != 0;
        std::vector<double> nd(static_cast<std::size_t>(K));
        double nd_sum = 0.0;
        for (int k = 0; k < K; ++k) {
          nd[static_cast<std::size_t>(k)] =
              std::max(0.0, doc_sum[static_cast<std::size_t>(k)] -
                                e.count * m[static_cast<std::size_t>(k)]) +
              alpha;
          nd_sum += nd[static_cast<std::size_t>(k)];
        }
        for (int k = 0; k < K; ++k) {
          const double ndk =
              nd_sum > kUnderflowFloor ? nd[static_cast<std::size_t>(k)] / nd_sum : 1.0 / K;
          double q = ndk * wf[static_cast<std::size_t>(k)];
          if (!flat) q *= u_row[static_cast<std::size_t>(k)];
          out[static_cast<std::size_t>(k)] = q;
          sum += q;
        }
        if (sum <= kUnderflowFloor)
          for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(k)] = 1.0 / K;
        else
          for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(k)] /= sum;
      }
      double delta = 0.0;
      for (int i = 0; i < n; ++i) delta += l1_distance(mu.row(i), staged.row(i));
      for (int i = 0; i < n; ++i) {
        auto dst = mu.row(i);
        const auto src = staged.row(i);
        for (int k = 0; k < K; ++k) dst[static_cast<std::size_t>(k)] = src[static_cast<std::size_t>(k)];
      }
      rebuild_doc_sum();
      if (delta / n < opts.convergence_tol) break;
    }

    auto th = res.theta.row(d);
    for (int k = 0; k < K; ++k) th[static_cast<std::size_t>(k)] = doc_sum[static_cast<std::size_t>(k)] + alpha;
    normalize_k(th);
  });

  if (model.head_enabled) {
    const int S = model.head.output_dim();
    res.output = Matrix(heldout.num_docs, S);
    const bool softmax = S > 1;
    parallel_for(heldout.num_docs, opts.threads, [&](int d) {
      HeadActivations act;
      head_forward(model.head, res.theta.row(d), nullptr, nullptr, softmax, act);
      auto row = res.output.row(d);
      if (softmax)
        for (int s = 0; s < S; ++s) row[static_cast<std::size_t>(s)] = act.probs[static_cast<std::size_t>(s)];
      else
        row[0] = act.scores[0];
    });
  }
  return res;
}

}  // namespace nalda
