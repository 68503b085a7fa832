#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "nalda/embed.hpp"
#include "oracle.hpp"

using namespace nalda;

TEST_CASE("embed_factor") {
  Rng rng(1);
  const Corpus corpus = oracle::random_corpus(rng, 2, 3, 2);

  SUBCASE("zero transform gives the uniform factor") {
    const EmbeddingTable table = oracle::random_embeddings(rng, corpus, 2);
    EmbedParams params;
    params.wc = Matrix(4, 2, 0.0);
    std::vector<double> u(4);
    embed_factor(params, table, 0, u);
    for (double x : u) CHECK(x == 0.25);
  }
  SUBCASE("missing word gives the uniform factor") {
    EmbeddingTable table;  // no rows at all
    table.dim = 2;
    table.index_map.assign(3, -1);
    EmbedParams params = EmbedParams::init(3, 2, 5);
    std::vector<double> u(3);
    embed_factor(params, table, 1, u);
    for (double x : u) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("K=2 E=1 hand-evaluated sigmoid") {
    EmbeddingTable table;
    table.dim = 1;
    table.vectors = Matrix(1, 1);
    table.vectors(0, 0) = 1.0;
    table.row_words = {"w1"};
    table.word_to_row = {{"w1", 0}};
    table.index_map = {0};
    EmbedParams params;
    params.wc = Matrix(2, 1);
    params.wc(0, 0) = 1.0;  // pre-activation [1, 0] on v = [1]
    params.wc(1, 0) = 0.0;
    std::vector<double> u(2);
    embed_factor(params, table, 0, u);
    CHECK(u[0] == doctest::Approx(0.5939).epsilon(1e-3));
    CHECK(u[1] == doctest::Approx(0.4061).epsilon(1e-3));
    CHECK(u[0] + u[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("utable marks uniform rows and repeats per word") {
  Rng rng(7);
  const Corpus corpus = oracle::random_corpus(rng, 3, 5, 2);
  const EmbeddingTable table = oracle::random_embeddings(rng, corpus, 3, 0.4);
  const EmbedParams params = EmbedParams::init(3, 3, 8);
  const UTable ut = UTable::build(params, &table, corpus.num_words, 3);
  for (int w = 0; w < corpus.num_words; ++w) {
    if (!table.has_row(w)) {
      CHECK(ut.uniform[static_cast<std::size_t>(w)] == 1);
      for (double x : ut.u.row(w)) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-15));
    } else {
      std::vector<double> expect(3);
      embed_factor(params, table, w, expect);
      for (int k = 0; k < 3; ++k) CHECK(ut.u(w, k) == expect[static_cast<std::size_t>(k)]);
    }
  }
  // zero transform: every row is flagged uniform even though all words have vectors
  EmbedParams zero;
  zero.wc = Matrix(3, 3, 0.0);
  const UTable flat = UTable::build(zero, &table, corpus.num_words, 3);
  for (int w = 0; w < corpus.num_words; ++w) CHECK(flat.uniform[static_cast<std::size_t>(w)] == 1);
}

TEST_CASE("uniform u cancels bitwise against the supervised update") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Corpus corpus = oracle::random_corpus(rng);
    const LabelSet labels = oracle::random_labels(rng, corpus, 2);
    const int K = 1 + rng.uniform_int(3);
    const MessageState state = init_messages(corpus, K, 300 + trial);
    const AggregateCache cache = rebuild_cache(corpus, state, &labels);
    const LdaHyperParams hyper{0.3, 0.05};
    SupervisedParams params = SupervisedParams::identity(K, 0.25);
    const EmbeddingTable table = oracle::random_embeddings(rng, corpus, 2);

    EmbedParams zero_wc;
    zero_wc.wc = Matrix(K, 2, 0.0);
    const UTable ut = UTable::build(zero_wc, &table, corpus.num_words, K);

    for (int i = 0; i < corpus.num_entries(); ++i) {
      std::vector<double> full(static_cast<std::size_t>(K)), sup(static_cast<std::size_t>(K));
      update_pair_full(corpus, cache, state, i, hyper, &labels, nullptr, params, ut,
                       MixTarget::doc, full);
      update_pair_supervised(corpus, cache, state, i, hyper, &labels, nullptr, params,
                             MixTarget::doc, sup);
      CHECK(full == sup);
    }
  }
}

TEST_CASE("eta=0 and zero transform reduce bitwise to the unsupervised update") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Corpus corpus = oracle::random_corpus(rng);
    const int K = 2;
    const MessageState state = init_messages(corpus, K, 400 + trial);
    const AggregateCache cache = rebuild_cache(corpus, state);
    const LdaHyperParams hyper{0.2, 0.02};
    const SupervisedParams params = SupervisedParams::identity(K, 0.0);
    const EmbeddingTable table = oracle::random_embeddings(rng, corpus, 2);
    EmbedParams zero_wc;
    zero_wc.wc = Matrix(K, 2, 0.0);
    const UTable ut = UTable::build(zero_wc, &table, corpus.num_words, K);
    for (int i = 0; i < corpus.num_entries(); ++i) {
      std::vector<double> full(static_cast<std::size_t>(K)), unsup(static_cast<std::size_t>(K));
      update_pair_full(corpus, cache, state, i, hyper, nullptr, nullptr, params, ut,
                       MixTarget::doc, full);
      update_pair_unsupervised(corpus, cache, state, i, hyper, unsup);
      CHECK(full == unsup);
    }
  }
}

TEST_CASE("full update matches brute force with embeddings and labels") {
  Rng rng(31415);
  for (int trial = 0; trial < 30; ++trial) {
    const Corpus corpus = oracle::random_corpus(rng);
    const LabelSet labels = oracle::random_labels(rng, corpus, 2);
    const int K = 1 + rng.uniform_int(3);
    const int E = 1 + rng.uniform_int(3);
    const MessageState state = init_messages(corpus, K, 7000 + trial);
    const AggregateCache cache = rebuild_cache(corpus, state, &labels);
    const LdaHyperParams hyper{rng.uniform(0.05, 1.0), rng.uniform(0.01, 0.3)};
    SupervisedParams params = SupervisedParams::identity(K, rng.uniform(0.0, 1.0));
    for (auto& w : params.ws_raw) w = rng.uniform(-1.0, 1.0);
    const EmbeddingTable table = oracle::random_embeddings(rng, corpus, E, 0.25);
    EmbedParams emb;
    emb.wc = Matrix(K, E);
    for (auto& x : emb.wc.data()) x = rng.uniform(-2.0, 2.0);
    const UTable ut = UTable::build(emb, &table, corpus.num_words, K);
    const MixTarget target = trial % 2 == 0 ? MixTarget::doc : MixTarget::word;

    for (int i = 0; i < corpus.num_entries(); ++i) {
      std::vector<double> engine(static_cast<std::size_t>(K));
      update_pair_full(corpus, cache, state, i, hyper, &labels, nullptr, params, ut, target,
                       engine);
      const auto expect =
          oracle::update_full(corpus, state, &labels, i, hyper.alpha, hyper.beta,
                              params.ws_diag(), params.eta, params.epsilon, emb.wc, table, target);
      for (int k = 0; k < K; ++k)
        CHECK(std::fabs(engine[static_cast<std::size_t>(k)] -
                        expect[static_cast<std::size_t>(k)]) < 1e-10);
    }
  }
}

TEST_CASE("pairs sharing a word receive the same u vector") {
  Rng rng(600);
  const Corpus corpus = oracle::random_corpus(rng, 4, 3, 2);
  const EmbeddingTable table = oracle::random_embeddings(rng, corpus, 2);
  const EmbedParams emb = EmbedParams::init(3, 2, 9);
  const UTable ut = UTable::build(emb, &table, corpus.num_words, 3);
  for (int i = 0; i < corpus.num_entries(); ++i)
    for (int j = 0; j < i; ++j)
      if (corpus.entries[static_cast<std::size_t>(i)].word ==
          corpus.entries[static_cast<std::size_t>(j)].word) {
        const auto a = ut.u.row(corpus.entries[static_cast<std::size_t>(i)].word);
        const auto b = ut.u.row(corpus.entries[static_cast<std::size_t>(j)].word);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
      }
}

TEST_CASE("embedding scale changes the factor (sigmoid is not homogeneous)") {
  EmbeddingTable table;
  table.dim = 2;
  table.vectors = Matrix(1, 2);
  table.vectors(0, 0) = 0.8;
  table.vectors(0, 1) = -0.3;
  table.row_words = {"w1"};
  table.word_to_row = {{"w1", 0}};
  table.index_map = {0};
  EmbedParams emb;
  emb.wc = Matrix(2, 2);
  emb.wc(0, 0) = 1.0;
  emb.wc(0, 1) = 0.5;
  emb.wc(1, 0) = -0.7;
  emb.wc(1, 1) = 0.2;
  std::vector<double> u1(2), u2(2);
  embed_factor(emb, table, 0, u1);
  table.vectors(0, 0) *= 3.0;
  table.vectors(0, 1) *= 3.0;
  embed_factor(emb, table, 0, u2);
  CHECK(std::fabs(u1[0] - u2[0]) > 1e-6);
}
