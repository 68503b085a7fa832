#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "nalda/checkpoint.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace nalda;
using testutil::TempDir;

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint ckpt;
  Model& m = ckpt.model;
  m.K = 3;
  m.lda = {0.7, 0.013};
  m.sup = SupervisedParams::identity(3, 0.25, 0.8);
  for (auto& w : m.sup.ws_raw) w = rng.uniform(-1.0, 1.0);
  m.emb.wc = Matrix(3, 4);
  for (auto& x : m.emb.wc.data()) x = rng.uniform(-1.0, 1.0);
  m.head = HeadParams::init(3, 5, 4, 2, 0.5, seed);
  m.head_enabled = true;
  m.mix_target = MixTarget::word;
  ckpt.label_kind = LabelKind::classification;
  ckpt.word_topic_mass = Matrix(6, 3);
  for (auto& x : ckpt.word_topic_mass.data()) x = rng.uniform(0.0, 5.0);
  return ckpt;
}

}  // namespace

TEST_CASE("checkpoint round-trips bitwise") {
  const Checkpoint original = sample_checkpoint(12);
  TempDir dir;
  save_checkpoint(original, dir.at("m.ckpt"));
  const Checkpoint loaded = load_checkpoint(dir.at("m.ckpt"));

  CHECK(loaded.model.K == original.model.K);
  CHECK(loaded.model.lda.alpha == original.model.lda.alpha);
  CHECK(loaded.model.lda.beta == original.model.lda.beta);
  CHECK(loaded.model.sup.eta == original.model.sup.eta);
  CHECK(loaded.model.sup.epsilon == original.model.sup.epsilon);
  CHECK(loaded.model.sup.ws_raw == original.model.sup.ws_raw);
  CHECK(loaded.model.emb.wc == original.model.emb.wc);
  CHECK(loaded.model.head.s_a == original.model.head.s_a);
  CHECK(loaded.model.head.t_c == original.model.head.t_c);
  CHECK(loaded.model.head.dropout_p == original.model.head.dropout_p);
  CHECK(loaded.model.mix_target == original.model.mix_target);
  CHECK(loaded.word_topic_mass == original.word_topic_mass);
  CHECK_FALSE(loaded.messages.has_value());

  // saving the loaded model reproduces the file byte for byte
  save_checkpoint(loaded, dir.at("m2.ckpt"));
  std::ifstream a(dir.at("m.ckpt"), std::ios::binary);
  std::ifstream b(dir.at("m2.ckpt"), std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("optional messages tensor survives") {
  Checkpoint ckpt = sample_checkpoint(5);
  ckpt.messages = Matrix(4, 3, 0.25);
  TempDir dir;
  save_checkpoint(ckpt, dir.at("m.ckpt"));
  const Checkpoint loaded = load_checkpoint(dir.at("m.ckpt"));
  REQUIRE(loaded.messages.has_value());
  CHECK(*loaded.messages == *ckpt.messages);
}

TEST_CASE("unsupervised checkpoints omit the head") {
  Checkpoint ckpt;
  ckpt.model.K = 2;
  ckpt.model.lda = {25.0, 0.01};
  ckpt.model.sup = SupervisedParams::identity(2, 0.0);
  ckpt.model.head_enabled = false;
  ckpt.word_topic_mass = Matrix(3, 2, 1.0);
  TempDir dir;
  save_checkpoint(ckpt, dir.at("u.ckpt"));
  const Checkpoint loaded = load_checkpoint(dir.at("u.ckpt"));
  CHECK_FALSE(loaded.model.head_enabled);
  CHECK(loaded.model.emb.wc.rows() == 0);
}

TEST_CASE("corrupt files are rejected") {
  TempDir dir;
  SUBCASE("bad magic") {
    dir.file("bad.ckpt", "definitely not a checkpoint");
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.at("bad.ckpt")), doctest::Contains("bad magic"),
                         ParseError);
  }
  SUBCASE("truncated body") {
    const Checkpoint ckpt = sample_checkpoint(9);
    save_checkpoint(ckpt, dir.at("full.ckpt"));
    std::ifstream in(dir.at("full.ckpt"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() / 2);
    dir.file("cut.ckpt", bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.at("cut.ckpt")), doctest::Contains("truncated"),
                         ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(dir.at("none.ckpt")), IoError); }
}
