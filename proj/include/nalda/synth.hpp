#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nalda/corpus.hpp"
#include "nalda/embeddings.hpp"
#include "nalda/matrix.hpp"
#include "nalda/rng.hpp"

namespace nalda {

// Seeded generator of corpora with known topic structure: topics drawn from a
// sharp Dirichlet (or uniform over disjoint word pools), documents mixing
// them, labels tied to the mixing weights, and embeddings placed at topic
// centroids plus jitter. The ground truth is returned so recovery can be
// scored.
struct SynthSpec {
  int docs = 200;
  int words = 50;
  int k_true = 2;
  int classes = 2;
  double doc_length = 30.0;         // mean tokens per document (Poisson)
  double topic_sharpness = 0.05;    // Dirichlet concentration of the topic-word rows
  double theta_concentration = 0.3; // Dirichlet concentration of document mixtures
  enum class LabelRule { argmax_theta, threshold_theta1 };
  LabelRule label_rule = LabelRule::argmax_theta;
  // dirichlet: heavy-headed topics over the shared vocabulary.
  // disjoint_uniform: each topic owns an equal slice of the vocabulary and is
  // uniform on it, giving a long tail of rare, topic-pure words.
  enum class WordDistribution { dirichlet, disjoint_uniform };
  WordDistribution word_distribution = WordDistribution::dirichlet;
  int embed_dim = 8;
  double embed_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (docs < 1 || words < 1 || k_true < 1 || classes < 1 || embed_dim < 1)
      throw std::invalid_argument("synth: all counts must be >= 1");
    if (topic_sharpness <= 0.0 || theta_concentration <= 0.0)
      throw std::invalid_argument("synth: Dirichlet concentrations must be > 0");
    if (doc_length <= 0.0) throw std::invalid_argument("synth: doc_length must be > 0");
    if (label_rule == LabelRule::threshold_theta1 && classes != 2)
      throw std::invalid_argument("synth: threshold rule requires 2 classes");
    if (embed_noise < 0.0) throw std::invalid_argument("synth: embed_noise must be >= 0");
  }
};

struct SynthData {
  Corpus corpus;
  LabelSet labels;
  EmbeddingTable table;
  Matrix theta_true;  // docs x k_true
  Matrix phi_true;    // k_true x vocabulary
};

// Train/test splits drawn from one set of topics. shadow_fraction > 0 doubles
// the vocabulary: test tokens flip to their shadow twin (never seen in
// training, same topic, own embedding row) with that probability.
// test_doc_length, when positive, overrides the generator's mean length for
// the held-out documents only.
struct SplitSpec {
  int train_docs = 0;
  int test_docs = 0;
  double shadow_fraction = 0.0;
  double test_doc_length = 0.0;
};

struct SynthSplit {
  SynthData train;
  SynthData test;
};

namespace detail {

inline std::string synth_word(int w) { return "w" + std::to_string(w + 1); }

inline EmbeddingTable make_topic_embeddings(const Matrix& phi, int vocab_size, int base_words,
                                            int embed_dim, double noise, Rng& rng) {
  EmbeddingTable table;
  table.dim = embed_dim;
  table.vectors = Matrix(vocab_size, embed_dim);
  for (int w = 0; w < vocab_size; ++w) {
    const int base = w % base_words;  // shadow words share the base word's topic
    int dom = 0;
    for (int k = 1; k < phi.rows(); ++k)
      if (phi(k, base) > phi(dom, base)) dom = k;
    auto row = table.vectors.row(w);
    row[static_cast<std::size_t>(dom % embed_dim)] = 1.0;
    for (double& x : row) x += noise * rng.gaussian();
    table.row_words.push_back(synth_word(w));
    table.word_to_row.emplace(synth_word(w), w);
  }
  return table;
}

}  // namespace detail

inline SynthSplit generate_split(const SynthSpec& spec, const SplitSpec& split) {
  spec.validate();
  if (split.train_docs + split.test_docs != spec.docs)
    throw std::invalid_argument("synth: split does not cover spec.docs");
  if (split.shadow_fraction < 0.0 || split.shadow_fraction > 1.0)
    throw std::invalid_argument("synth: shadow_fraction must lie in [0,1]");

  Rng rng(spec.seed);
  const int K = spec.k_true;
  const int W = spec.words;
  const bool shadow = split.shadow_fraction > 0.0;
  const int vocab_size = shadow ? 2 * W : W;

  Matrix phi(K, vocab_size);
  if (spec.word_distribution == SynthSpec::WordDistribution::dirichlet) {
    for (int k = 0; k < K; ++k) {
      const auto draw = rng.dirichlet(W, spec.topic_sharpness);
      for (int w = 0; w < W; ++w) phi(k, w) = draw[static_cast<std::size_t>(w)];
    }
  } else {
    const int slice = W / K;
    if (slice < 1) throw std::invalid_argument("synth: vocabulary smaller than k_true");
    for (int k = 0; k < K; ++k) {
      const int lo = k * slice;
      const int hi = k == K - 1 ? W : lo + slice;
      for (int w = lo; w < hi; ++w) phi(k, w) = 1.0 / (hi - lo);
    }
  }

  std::vector<std::string> vocab;
  for (int w = 0; w < vocab_size; ++w) vocab.push_back(detail::synth_word(w));

  EmbeddingTable table =
      detail::make_topic_embeddings(phi, vocab_size, W, spec.embed_dim, spec.embed_noise, rng);
  table.rebuild_index(vocab);

  auto make_part = [&](int n_docs, bool is_test) {
    SynthData part;
    part.corpus.num_docs = n_docs;
    part.corpus.num_words = vocab_size;
    part.corpus.vocabulary = vocab;
    part.labels.kind = LabelKind::classification;
    part.labels.class_count = spec.classes;
    part.theta_true = Matrix(n_docs, K);
    part.phi_true = phi;
    part.table = table;

    const double mean_tokens =
        is_test && split.test_doc_length > 0.0 ? split.test_doc_length : spec.doc_length;
    std::vector<double> phi_row(static_cast<std::size_t>(W));
    for (int d = 0; d < n_docs; ++d) {
      const auto theta = rng.dirichlet(K, spec.theta_concentration);
      for (int k = 0; k < K; ++k) part.theta_true(d, k) = theta[static_cast<std::size_t>(k)];

      const int tokens = std::max(1, rng.poisson(mean_tokens));
      std::map<int, double> counts;
      for (int t = 0; t < tokens; ++t) {
        const int z = rng.categorical(theta);
        for (int w = 0; w < W; ++w) phi_row[static_cast<std::size_t>(w)] = phi(z, w);
        int w = rng.categorical(phi_row);
        if (is_test && shadow && rng.uniform01() < split.shadow_fraction) w += W;
        counts[w] += 1.0;
      }
      for (const auto& [w, c] : counts) part.corpus.entries.push_back({d, w, c});

      int label;
      if (spec.label_rule == SynthSpec::LabelRule::argmax_theta) {
        int best = 0;
        for (int k = 1; k < K; ++k)
          if (theta[static_cast<std::size_t>(k)] > theta[static_cast<std::size_t>(best)]) best = k;
        label = best % spec.classes;
      } else {
        label = theta[0] >= 0.5 ? 0 : 1;
      }
      part.labels.classes.push_back(label);
    }
    part.corpus.finalize();
    return part;
  };

  SynthSplit out;
  out.train = make_part(split.train_docs, false);
  out.test = make_part(split.test_docs, true);
  return out;
}

inline SynthData generate(const SynthSpec& spec) {
  SplitSpec split;
  split.train_docs = spec.docs;
  return std::move(generate_split(spec, split).train);
}

inline void write_matrix_tsv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out.precision(12);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out << (c ? "\t" : "") << m(r, c);
    out << "\n";
  }
}

// Lays a split out in the conventional dataset directory format consumed by
// the command-line tool: vocab.txt, embeddings.vec, train/test bow and label
// files, plus the generator's ground truth.
inline void write_dataset(const SynthSplit& split, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto p = [&dir](const std::string& name) { return (fs::path(dir) / name).string(); };
  write_corpus(split.train.corpus, p("train.bow"), p("vocab.txt"));
  write_labels(split.train.labels, p("train.labels"));
  if (split.test.corpus.num_docs > 0) {
    std::string vocab_again = p("vocab.txt");
    write_corpus(split.test.corpus, p("test.bow"), vocab_again);
    write_labels(split.test.labels, p("test.labels"));
  }
  write_embeddings(split.train.table, p("embeddings.vec"));
  write_matrix_tsv(split.train.phi_true, p("truth_phi.tsv"));
  write_matrix_tsv(split.train.theta_true, p("truth_theta.tsv"));
}

}  // namespace nalda
