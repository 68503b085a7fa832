#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nalda/corpus.hpp"
#include "nalda/synth.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace nalda;
using testutil::TempDir;

TEST_CASE("generation is deterministic in the seed") {
  SynthSpec spec;
  spec.docs = 30;
  spec.words = 20;
  spec.seed = 77;
  const SynthData a = generate(spec);
  const SynthData b = generate(spec);
  CHECK(a.corpus.entries.size() == b.corpus.entries.size());
  for (std::size_t i = 0; i < a.corpus.entries.size(); ++i) {
    CHECK(a.corpus.entries[i].doc == b.corpus.entries[i].doc);
    CHECK(a.corpus.entries[i].word == b.corpus.entries[i].word);
    CHECK(a.corpus.entries[i].count == b.corpus.entries[i].count);
  }
  CHECK(a.labels.classes == b.labels.classes);
  CHECK(a.phi_true == b.phi_true);
  spec.seed = 78;
  const SynthData c = generate(spec);
  CHECK(a.phi_true != c.phi_true);
}

TEST_CASE("k_true=1 collapses to a single word distribution") {
  SynthSpec spec;
  spec.docs = 10;
  spec.words = 15;
  spec.k_true = 1;
  spec.classes = 2;
  spec.seed = 5;
  const SynthData d = generate(spec);
  CHECK(d.phi_true.rows() == 1);
  for (int i = 0; i < d.theta_true.rows(); ++i) CHECK(d.theta_true(i, 0) == doctest::Approx(1.0));
  // argmax labels are all the same class: the labels carry no information
  for (int c : d.labels.classes) CHECK(c == d.labels.classes[0]);
}

TEST_CASE("noise-free embeddings sit exactly on the topic centroids") {
  SynthSpec spec;
  spec.docs = 20;
  spec.words = 12;
  spec.k_true = 2;
  spec.embed_dim = 2;
  spec.embed_noise = 0.0;
  spec.seed = 9;
  const SynthData d = generate(spec);
  for (int w = 0; w < spec.words; ++w) {
    REQUIRE(d.table.has_row(w));
    const auto v = d.table.vec(w);
    int dom = 0;
    for (int k = 1; k < spec.k_true; ++k)
      if (d.phi_true(k, w) > d.phi_true(dom, w)) dom = k;
    for (int e = 0; e < spec.embed_dim; ++e)
      CHECK(v[static_cast<std::size_t>(e)] == (e == dom ? 1.0 : 0.0));
  }
}

TEST_CASE("argmax labels are near-balanced for symmetric mixtures") {
  SynthSpec spec;
  spec.docs = 400;
  spec.words = 40;
  spec.k_true = 2;
  spec.classes = 2;
  spec.seed = 31;
  const SynthData d = generate(spec);
  int ones = 0;
  for (int c : d.labels.classes) ones += c;
  // 3-sigma binomial bound around D/2
  const double sigma = std::sqrt(400 * 0.25);
  CHECK(std::fabs(ones - 200.0) <= 3.0 * sigma);
}

TEST_CASE("naive bayes verifies the task is learnable before the engine sees it") {
  SynthSpec spec;
  spec.docs = 300;
  spec.words = 50;
  spec.k_true = 2;
  spec.classes = 2;
  spec.doc_length = 30;
  spec.topic_sharpness = 0.05;
  spec.seed = 2020;
  SplitSpec split;
  split.train_docs = 200;
  split.test_docs = 100;
  const SynthSplit data = generate_split(spec, split);
  const auto nb = oracle::NaiveBayes::fit(data.train.corpus, data.train.labels);
  CHECK(nb.accuracy(data.test.corpus, data.test.labels) >= 0.95);
}

TEST_CASE("shadow split doubles the vocabulary and hides twins from training") {
  SynthSpec spec;
  spec.docs = 60;
  spec.words = 25;
  spec.k_true = 2;
  spec.seed = 3;
  SplitSpec split;
  split.train_docs = 40;
  split.test_docs = 20;
  split.shadow_fraction = 0.5;
  const SynthSplit data = generate_split(spec, split);
  CHECK(data.train.corpus.num_words == 50);
  CHECK(data.test.corpus.num_words == 50);
  for (const auto& e : data.train.corpus.entries) CHECK(e.word < 25);
  double shadow_tokens = 0.0, total_tokens = 0.0;
  for (const auto& e : data.test.corpus.entries) {
    total_tokens += e.count;
    if (e.word >= 25) shadow_tokens += e.count;
  }
  CHECK(shadow_tokens / total_tokens == doctest::Approx(0.5).epsilon(0.15));
  // every shadow word is embedding-covered
  for (int w = 25; w < 50; ++w) CHECK(data.train.table.has_row(w));
}

TEST_CASE("dataset files round-trip through the corpus loaders") {
  SynthSpec spec;
  spec.docs = 40;
  spec.words = 15;
  spec.seed = 8;
  SplitSpec split;
  split.train_docs = 30;
  split.test_docs = 10;
  const SynthSplit data = generate_split(spec, split);
  TempDir dir;
  write_dataset(data, dir.at("ds"));

  const Corpus train = load_corpus(dir.at("ds/train.bow"), dir.at("ds/vocab.txt"));
  CHECK(train.num_docs == 30);
  REQUIRE(train.entries.size() == data.train.corpus.entries.size());
  for (std::size_t i = 0; i < train.entries.size(); ++i) {
    CHECK(train.entries[i].doc == data.train.corpus.entries[i].doc);
    CHECK(train.entries[i].word == data.train.corpus.entries[i].word);
    CHECK(train.entries[i].count == data.train.corpus.entries[i].count);
  }
  const LabelSet labels =
      load_labels(dir.at("ds/train.labels"), train, LabelKind::classification);
  CHECK(labels.classes == data.train.labels.classes);
  const EmbeddingTable table = load_embeddings(dir.at("ds/embeddings.vec"), train);
  CHECK(table.dim == spec.embed_dim);
  CHECK(table.coverage == doctest::Approx(1.0));
  const Corpus test = load_corpus(dir.at("ds/test.bow"), dir.at("ds/vocab.txt"));
  CHECK(test.num_docs == 10);
}

TEST_CASE("disjoint-uniform topics own vocabulary slices") {
  SynthSpec spec;
  spec.docs = 40;
  spec.words = 90;
  spec.k_true = 3;
  spec.classes = 3;
  spec.word_distribution = SynthSpec::WordDistribution::disjoint_uniform;
  spec.theta_concentration = 0.01;
  spec.doc_length = 8;
  spec.seed = 12;
  const SynthData d = generate(spec);
  for (int k = 0; k < 3; ++k)
    for (int w = 0; w < 90; ++w) {
      const bool owned = w >= k * 30 && w < (k + 1) * 30;
      CHECK(d.phi_true(k, w) == (owned ? doctest::Approx(1.0 / 30) : doctest::Approx(0.0)));
    }
  // near-pure documents: tokens stay inside one slice almost always
  int pure = 0;
  for (int doc = 0; doc < d.corpus.num_docs; ++doc) {
    int slices[3] = {0, 0, 0};
    for (int i = d.corpus.doc_begin[doc]; i < d.corpus.doc_begin[doc + 1]; ++i)
      slices[d.corpus.entries[static_cast<std::size_t>(i)].word / 30] = 1;
    if (slices[0] + slices[1] + slices[2] == 1) ++pure;
  }
  CHECK(pure >= 35);
}

TEST_CASE("split can shorten held-out documents") {
  SynthSpec spec;
  spec.docs = 300;
  spec.words = 30;
  spec.doc_length = 40;
  spec.seed = 4;
  SplitSpec split;
  split.train_docs = 150;
  split.test_docs = 150;
  split.test_doc_length = 8;
  const SynthSplit data = generate_split(spec, split);
  double train_mean = 0, test_mean = 0;
  for (double l : data.train.corpus.doc_lengths) train_mean += l / 150;
  for (double l : data.test.corpus.doc_lengths) test_mean += l / 150;
  CHECK(train_mean > 30.0);
  CHECK(test_mean < 12.0);
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec spec;
  spec.docs = 0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec.docs = 5;
  spec.topic_sharpness = 0.0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec.topic_sharpness = 0.1;
  spec.label_rule = SynthSpec::LabelRule::threshold_theta1;
  spec.classes = 3;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}
