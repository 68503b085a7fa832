#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nalda/eval.hpp"
#include "oracle.hpp"

using namespace nalda;

namespace {

LabelSet truth_of(std::vector<int> classes, int count) {
  LabelSet l;
  l.kind = LabelKind::classification;
  l.class_count = count;
  l.classes = std::move(classes);
  return l;
}

// documents listed as word sets; counts are all 1
Corpus corpus_of(std::vector<std::vector<int>> docs, int words) {
  Corpus c;
  c.num_docs = static_cast<int>(docs.size());
  c.num_words = words;
  for (int w = 0; w < words; ++w) c.vocabulary.push_back("w" + std::to_string(w + 1));
  for (int d = 0; d < c.num_docs; ++d)
    for (int w : docs[static_cast<std::size_t>(d)]) c.entries.push_back({d, w, 1.0});
  c.finalize();
  return c;
}

}  // namespace

TEST_CASE("classification metrics") {
  SUBCASE("perfect one-hot predictions") {
    Matrix probs(2, 2);
    probs(0, 0) = 1.0;
    probs(1, 1) = 1.0;
    const auto m = classification_metrics(probs, truth_of({0, 1}, 2));
    CHECK(m.accuracy == 1.0);
    CHECK(m.cross_entropy == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("uniform predictions give ln 2 and the tie goes to class 1") {
    Matrix probs(2, 2, 0.5);
    const auto m = classification_metrics(probs, truth_of({0, 1}, 2));
    CHECK(m.cross_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(m.accuracy == 0.5);  // argmax ties resolve to the lowest index: doc 1 right, doc 2 wrong
  }
  SUBCASE("hand-evaluated mixed case") {
    Matrix probs(2, 2);
    probs(0, 0) = 0.9;
    probs(0, 1) = 0.1;
    probs(1, 0) = 0.2;
    probs(1, 1) = 0.8;
    const auto m = classification_metrics(probs, truth_of({0, 0}, 2));
    CHECK(m.cross_entropy ==
          doctest::Approx((-std::log(0.9) - std::log(0.2)) / 2).epsilon(1e-12));
    CHECK(m.cross_entropy == doctest::Approx(0.8573992).epsilon(1e-6));
    CHECK(m.accuracy == 0.5);
  }
  SUBCASE("confident wrong prediction is floor-limited, cross-entropy stays finite") {
    Matrix probs(1, 2);
    probs(0, 0) = 1.0;
    probs(0, 1) = 0.0;
    const auto m = classification_metrics(probs, truth_of({1}, 2));
    CHECK(std::isfinite(m.cross_entropy));
    CHECK(m.cross_entropy == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
    CHECK(m.cross_entropy >= 0.0);
  }
  SUBCASE("length mismatch") {
    Matrix probs(2, 2, 0.5);
    CHECK_THROWS_AS(classification_metrics(probs, truth_of({0}, 2)), std::invalid_argument);
  }
}

TEST_CASE("topic_top_words") {
  Matrix phi(1, 3);
  phi(0, 0) = 0.5;
  phi(0, 1) = 0.3;
  phi(0, 2) = 0.2;
  const std::vector<std::string> vocab{"a", "b", "c"};
  SUBCASE("descending probability") {
    const auto tops = topic_top_words(phi, vocab, 2);
    CHECK(tops[0] == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("uniform row falls back to vocabulary order") {
    Matrix flat(1, 3, 1.0 / 3);
    const auto tops = topic_top_words(flat, vocab, 2);
    CHECK(tops[0] == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("n equal to the vocabulary returns everything in phi order") {
    const auto tops = topic_top_words(phi, vocab, 3);
    CHECK(tops[0] == std::vector<std::string>{"a", "b", "c"});
  }
  SUBCASE("n beyond the vocabulary is an error") {
    CHECK_THROWS_AS(topic_top_words(phi, vocab, 4), std::invalid_argument);
  }
}

TEST_CASE("npmi coherence") {
  SUBCASE("perfectly co-occurring words approach 1") {
    // 100 docs, words 1 and 2 always together, filler words elsewhere
    std::vector<std::vector<int>> docs;
    for (int d = 0; d < 100; ++d) docs.push_back({0, 1, 2 + d % 3});
    const Corpus reference = corpus_of(docs, 5);
    const auto rep = coherence({{"w1", "w2"}}, reference, CoherenceMeasure::npmi);
    CHECK(rep.per_topic[0] > 0.9);
  }
  SUBCASE("never co-occurring words hand-evaluated on 10 documents") {
    // w1 in docs 1-5, w2 in docs 6-10
    std::vector<std::vector<int>> docs;
    for (int d = 0; d < 5; ++d) docs.push_back({0, 2});
    for (int d = 0; d < 5; ++d) docs.push_back({1, 2});
    const Corpus reference = corpus_of(docs, 3);
    const auto rep = coherence({{"w1", "w2"}}, reference, CoherenceMeasure::npmi);
    // add-one smoothing: p12 = 1/12, p1 = p2 = 6/12
    const double expect = std::log((1.0 / 12) / (0.5 * 0.5)) / -std::log(1.0 / 12);
    CHECK(rep.per_topic[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(rep.per_topic[0] < 0.0);
  }
  SUBCASE("single-word topic has coherence 0") {
    const Corpus reference = corpus_of({{0, 1}}, 2);
    const auto rep = coherence({{"w1"}}, reference, CoherenceMeasure::npmi);
    CHECK(rep.per_topic[0] == 0.0);
  }
  SUBCASE("missing words contribute the smoothed minimum with a warning count") {
    const Corpus reference = corpus_of({{0}, {0}}, 1);
    const auto rep = coherence({{"w1", "unknown"}}, reference, CoherenceMeasure::npmi);
    CHECK(rep.missing_words == 1);
    CHECK(std::isfinite(rep.per_topic[0]));
  }
  SUBCASE("bounded in [-1, 1]") {
    Rng rng(31);
    const Corpus reference = oracle::random_corpus(rng, 4, 5, 2);
    const auto rep =
        coherence({{"w1", "w2", "w3"}, {"w2", "w4"}}, reference, CoherenceMeasure::npmi);
    for (double c : rep.per_topic) {
      CHECK(c <= 1.0 + 1e-12);
      CHECK(c >= -1.0 - 1e-12);
    }
  }
  SUBCASE("positional windows are rejected for bag-of-words input") {
    const Corpus reference = corpus_of({{0, 1}}, 2);
    CHECK_THROWS_AS(coherence({{"w1", "w2"}}, reference, CoherenceMeasure::npmi, 10),
                    std::invalid_argument);
  }
}

TEST_CASE("umass coherence") {
  // df(w1) = 3, df(w2) = 2, df(w1, w2) = 2 over 4 docs
  const Corpus reference = corpus_of({{0, 1}, {0, 1}, {0}, {2}}, 3);
  const auto rep = coherence({{"w1", "w2"}}, reference, CoherenceMeasure::umass);
  // ordered pair (w2 | w1): log((df12 + 1)/df(w1)) = log(3/3)
  CHECK(rep.per_topic[0] == doctest::Approx(std::log(3.0 / 3.0)).epsilon(1e-12));

  const auto rep2 = coherence({{"w2", "w3"}}, reference, CoherenceMeasure::umass);
  // df(w3) = 1, df(w2,w3) = 0: log(1/2)
  CHECK(rep2.per_topic[0] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("injecting co-occurrences never lowers npmi") {
  std::vector<std::vector<int>> docs;
  for (int d = 0; d < 10; ++d) docs.push_back({d % 2, 2 + d % 3});
  docs.push_back({0, 1});
  Corpus reference = corpus_of(docs, 5);
  const auto before = coherence({{"w1", "w2"}}, reference, CoherenceMeasure::npmi);
  for (int extra = 0; extra < 5; ++extra) {
    docs.push_back({0, 1});
    const Corpus bigger = corpus_of(docs, 5);
    const auto after = coherence({{"w1", "w2"}}, bigger, CoherenceMeasure::npmi);
    CHECK(after.per_topic[0] >= before.per_topic[0] - 1e-12);
  }
}

TEST_CASE("deterministic reports") {
  Rng rng(8);
  const Corpus reference = oracle::random_corpus(rng, 5, 5, 3);
  const auto a = coherence({{"w1", "w2", "w3"}}, reference, CoherenceMeasure::npmi);
  const auto b = coherence({{"w1", "w2", "w3"}}, reference, CoherenceMeasure::npmi);
  CHECK(a.per_topic == b.per_topic);
  CHECK(a.mean == b.mean);
}

TEST_CASE("best-permutation total variation") {
  Matrix a(2, 3);
  a(0, 0) = 1.0;              // topic A: word 1
  a(1, 1) = 0.5;
  a(1, 2) = 0.5;              // topic B: words 2, 3
  Matrix b(2, 3);
  b(0, 1) = 0.5;
  b(0, 2) = 0.5;              // same topics, swapped order
  b(1, 0) = 1.0;
  CHECK(best_permutation_mean_tv(a, b) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(best_permutation_mean_tv(a, a) == 0.0);

  Matrix c(2, 3);
  c(0, 0) = 0.5;
  c(0, 1) = 0.5;
  c(1, 2) = 1.0;
  const double tv = best_permutation_mean_tv(a, c);
  CHECK(tv > 0.0);
  CHECK(tv <= 1.0);
}

TEST_CASE("report serialization") {
  EvalReport r;
  r.num_docs = 10;
  r.num_classes = 2;
  r.cross_entropy = 0.5;
  r.accuracy = 0.9;
  r.coherence_measure = "npmi";
  r.coherence_per_topic = {0.2, 0.4};
  r.coherence_mean = 0.3;
  r.top_words = {{"a", "b"}, {"c", "d"}};
  r.top_n = 2;
  const auto j = to_json(r);
  CHECK(j["accuracy"] == 0.9);
  CHECK(j["top_words"][1][0] == "c");
  CHECK(to_json(r).dump() == to_json(r).dump());
  const std::string text = to_text(r);
  CHECK(text.find("accuracy") != std::string::npos);
  CHECK(text.find("topic 2") != std::string::npos);
}
