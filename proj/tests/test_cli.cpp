#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

using testutil::TempDir;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string out_path = dir.at("stdout.txt");
  const std::string err_path = dir.at("stderr.txt");
  const std::string cmd =
      std::string(NALDA_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.stdout_text = slurp(out_path);
  r.stderr_text = slurp(err_path);
  return r;
}

std::string slurp_file(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth-train-eval pipeline produces a report") {
  TempDir dir;
  const auto synth = run_cli("synth --preset two-topic --docs 120 --heldout-frac 0.25 --seed 5 --out " +
                                 dir.at("ds"),
                             dir);
  REQUIRE(synth.exit_code == 0);
  CHECK(synth.stdout_text.find("# command = synth") != std::string::npos);

  const auto train = run_cli("train --corpus " + dir.at("ds") +
                                 " --topics 2 --eta 0.1 --seed 7 --rounds 30 --hidden 4,4"
                                 " --dropout 0 --out " +
                                 dir.at("m.ckpt") + " --log " + dir.at("train.csv"),
                             dir);
  REQUIRE(train.exit_code == 0);
  CHECK(train.stdout_text.find("# seed = 7") != std::string::npos);
  CHECK(train.stdout_text.find("checkpoint written") != std::string::npos);

  // the log leads with the reproducibility header and one csv row per round
  const std::string log = slurp_file(dir.at("train.csv"));
  CHECK(log.find("# command = train") != std::string::npos);
  CHECK(log.find("round,mean_message_delta,train_loss") != std::string::npos);

  const auto eval = run_cli("eval --model " + dir.at("m.ckpt") + " --heldout " + dir.at("ds/test") +
                                " --top-n 5 --out " + dir.at("report.json"),
                            dir);
  REQUIRE(eval.exit_code == 0);
  const std::string report = slurp_file(dir.at("report.json"));
  CHECK(report.find("\"accuracy\"") != std::string::npos);
  CHECK(report.find("\"coherence_mean\"") != std::string::npos);
  CHECK(report.find("\"top_words\"") != std::string::npos);

  const auto topics = run_cli("topics --model " + dir.at("m.ckpt") + " --corpus " + dir.at("ds") +
                                  " --top-n 3",
                              dir);
  REQUIRE(topics.exit_code == 0);
  CHECK(topics.stdout_text.find("topic 1:") != std::string::npos);

  const auto infer = run_cli("infer --model " + dir.at("m.ckpt") + " --heldout " +
                                 dir.at("ds/test") + " --out " + dir.at("probs.tsv"),
                             dir);
  REQUIRE(infer.exit_code == 0);
  std::ifstream probs(dir.at("probs.tsv"));
  int lines = 0;
  std::string line;
  while (std::getline(probs, line)) ++lines;
  CHECK(lines == 30);  // 25% of 120
}

TEST_CASE("train without labels falls back to the unsupervised path") {
  TempDir dir;
  REQUIRE(run_cli("synth --docs 40 --words 20 --heldout-frac 0 --seed 2 --out " + dir.at("ds"),
                  dir)
              .exit_code == 0);
  // point at the bare bow file so no labels are resolved
  const auto train = run_cli("train --corpus " + dir.at("ds/train.bow") + " --vocab " +
                                 dir.at("ds/vocab.txt") + " --topics 2 --rounds 10 --out " +
                                 dir.at("u.ckpt"),
                             dir);
  CHECK(train.exit_code == 0);
  CHECK(train.stdout_text.find("labels = (none)") != std::string::npos);
}

TEST_CASE("validation failures exit 1 with a single-line diagnostic") {
  TempDir dir;
  REQUIRE(run_cli("synth --docs 30 --words 10 --heldout-frac 0 --seed 3 --out " + dir.at("ds"),
                  dir)
              .exit_code == 0);
  const auto bad = run_cli("train --corpus " + dir.at("ds") + " --topics 0 --rounds 1 --out " +
                               dir.at("x.ckpt"),
                           dir);
  CHECK(bad.exit_code == 1);
  CHECK(bad.stderr_text.find("topics must be >= 1") != std::string::npos);
}

TEST_CASE("missing files exit 2") {
  TempDir dir;
  const auto r = run_cli("train --corpus " + dir.at("missing") + " --topics 2", dir);
  CHECK(r.exit_code == 2);
}

TEST_CASE("unknown flags exit 1") {
  TempDir dir;
  const auto r = run_cli("train --no-such-flag", dir);
  CHECK(r.exit_code == 1);
}

TEST_CASE("config files feed flags with command-line precedence") {
  TempDir dir;
  REQUIRE(run_cli("synth --docs 40 --words 15 --heldout-frac 0 --seed 4 --out " + dir.at("ds"),
                  dir)
              .exit_code == 0);
  dir.file("run.cfg", "topics=3\nrounds=5\nseed=11\ndropout=0\nhidden=3,3\n");
  const auto from_file = run_cli("train --corpus " + dir.at("ds") + " --config " +
                                     dir.at("run.cfg") + " --out " + dir.at("a.ckpt"),
                                 dir);
  REQUIRE(from_file.exit_code == 0);
  CHECK(from_file.stdout_text.find("# topics = 3") != std::string::npos);
  CHECK(from_file.stdout_text.find("# seed = 11") != std::string::npos);

  const auto overridden = run_cli("train --corpus " + dir.at("ds") + " --config " +
                                      dir.at("run.cfg") + " --topics 4 --out " + dir.at("b.ckpt"),
                                  dir);
  REQUIRE(overridden.exit_code == 0);
  CHECK(overridden.stdout_text.find("# topics = 4") != std::string::npos);
}

TEST_CASE("rerunning a pipeline with one or many threads is byte-identical") {
  TempDir dir;
  REQUIRE(run_cli("synth --preset two-topic --docs 100 --heldout-frac 0.3 --seed 21 --out " +
                      dir.at("ds"),
                  dir)
              .exit_code == 0);
  const std::string train_common = "train --corpus " + dir.at("ds") +
                                   " --topics 2 --eta 0.1 --rounds 20 --hidden 4,4 --dropout 0.5"
                                   " --seed 13 ";
  REQUIRE(run_cli(train_common + "--threads 1 --out " + dir.at("t1.ckpt"), dir).exit_code == 0);
  REQUIRE(run_cli(train_common + "--threads 2 --out " + dir.at("t2.ckpt"), dir).exit_code == 0);
  CHECK(slurp_file(dir.at("t1.ckpt")) == slurp_file(dir.at("t2.ckpt")));

  const std::string eval_common = "eval --model " + dir.at("t1.ckpt") + " --heldout " +
                                  dir.at("ds/test") + " --seed 5 ";
  REQUIRE(run_cli(eval_common + "--threads 1 --out " + dir.at("r1.json"), dir).exit_code == 0);
  REQUIRE(run_cli(eval_common + "--threads 3 --out " + dir.at("r2.json"), dir).exit_code == 0);
  CHECK(slurp_file(dir.at("r1.json")) == slurp_file(dir.at("r2.json")));
}
