// Command-line front end: train / infer / eval / topics / synth.
//
// Dataset directories follow the convention written by `synth`:
//   vocab.txt, embeddings.vec, train.bow, train.labels, test.bow, test.labels
// Corpus arguments accept such a directory, a path prefix (PREFIX.bow must
// exist), or an explicit .bow file plus --vocab.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nalda/nalda.hpp"

namespace fs = std::filesystem;

namespace {

struct ResolvedCorpus {
  std::string bow;
  std::string vocab;
  std::string labels;      // empty when absent
  std::string embeddings;  // empty when absent
  std::string dir;         // containing dataset directory when recognized
};

ResolvedCorpus resolve_corpus(const std::string& arg, const std::string& vocab_flag,
                              const std::string& labels_flag, const std::string& emb_flag,
                              const std::string& role) {
  ResolvedCorpus r;
  fs::path base;
  if (fs::is_directory(arg)) {
    base = arg;
    r.bow = (base / (role + ".bow")).string();
  } else if (fs::exists(arg)) {
    r.bow = arg;
    base = fs::path(arg).parent_path();
  } else if (fs::exists(arg + ".bow")) {
    r.bow = arg + ".bow";
    base = fs::path(arg).parent_path();
    if (labels_flag.empty() && fs::exists(arg + ".labels")) r.labels = arg + ".labels";
  } else {
    throw nalda::IoError("corpus not found: " + arg);
  }
  r.dir = base.string();

  if (!vocab_flag.empty())
    r.vocab = vocab_flag;
  else if (fs::exists(base / "vocab.txt"))
    r.vocab = (base / "vocab.txt").string();
  else
    throw nalda::IoError("vocabulary not found; pass --vocab or use a dataset directory");

  if (!labels_flag.empty()) r.labels = labels_flag;
  if (r.labels.empty() && fs::is_directory(arg) && fs::exists(base / (role + ".labels")))
    r.labels = (base / (role + ".labels")).string();

  if (!emb_flag.empty())
    r.embeddings = emb_flag;
  else if (fs::exists(base / "embeddings.vec"))
    r.embeddings = (base / "embeddings.vec").string();
  return r;
}

void echo_config(const std::string& subcommand,
                 const std::vector<std::pair<std::string, std::string>>& kv, std::ostream& out,
                 const char* prefix = "# ") {
  out << prefix << "command = " << subcommand << "\n";
  for (const auto& [k, v] : kv) out << prefix << k << " = " << v << "\n";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands `--config FILE` for a subcommand: every `key = value` line becomes
// a `--key=value` token unless that option was already given on the command
// line, so explicit flags always win. Section headers and comments are
// ignored; flags take true/false values.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App* sub) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw nalda::IoError("cannot open config file: " + config_path);

  // options explicitly present on the command line
  std::set<const CLI::Option*> given;
  for (const auto& a : args) {
    if (a.size() < 2 || a[0] != '-') continue;
    const std::string name = a.substr(0, a.find('='));
    if (const CLI::Option* opt = sub->get_option_no_throw(name)) given.insert(opt);
  }

  std::vector<std::string> out = args;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trimmed(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw nalda::ParseError("config file: expected key=value at line " +
                              std::to_string(line_no));
    const std::string key = trimmed(line.substr(0, eq));
    std::string value = trimmed(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw nalda::ParseError("config file: unknown option '" + key + "' at line " +
                              std::to_string(line_no));
    if (given.count(opt)) continue;
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

struct CommonTrainFlags {
  std::string corpus, vocab, labels, embeddings, out = "model.ckpt", log_path;
  bool regression = false;
  bool unsupervised = false;
  bool save_messages = false;
  int min_embedded_words = 0;
  std::string hidden = "50,50";
  std::string mix_target = "doc";
  std::string grad_path = "unroll1";
  nalda::TrainConfig cfg;
};

std::pair<int, int> parse_hidden(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) {
    const int h = std::stoi(s);
    return {h, h};
  }
  return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
}

int run_train(const CommonTrainFlags& flags) {
  using namespace nalda;
  const auto rc = resolve_corpus(flags.corpus, flags.vocab,
                                 flags.unsupervised ? "" : flags.labels, flags.embeddings, "train");
  Corpus corpus = load_corpus(rc.bow, rc.vocab);

  std::optional<LabelSet> labels;
  if (!flags.unsupervised && !rc.labels.empty())
    labels = load_labels(rc.labels, corpus,
                         flags.regression ? LabelKind::regression : LabelKind::classification);

  std::optional<EmbeddingTable> table;
  if (!rc.embeddings.empty()) table = load_embeddings(rc.embeddings, corpus);

  if (flags.min_embedded_words > 0) {
    if (!table) throw IoError("--min-embedded-words requires embeddings");
    const auto keep = docs_with_min_embedded_tokens(corpus, *table, flags.min_embedded_words);
    if (static_cast<int>(keep.size()) < corpus.num_docs) {
      std::cerr << "dropping " << (corpus.num_docs - static_cast<int>(keep.size()))
                << " document(s) below the embedded-token threshold\n";
      if (labels) *labels = subset_labels(*labels, keep);
      corpus = subset_docs(corpus, keep);
      if (table) table->rebuild_index(corpus.vocabulary);
    }
  }

  TrainConfig cfg = flags.cfg;
  auto [h1, h2] = parse_hidden(flags.hidden);
  cfg.h1 = h1;
  cfg.h2 = h2;
  cfg.mix_target = flags.mix_target == "word" ? MixTarget::word : MixTarget::doc;
  cfg.grad_path = flags.grad_path == "none" ? GradPath::none : GradPath::unroll1;

  std::vector<std::pair<std::string, std::string>> kv = {
      {"corpus", rc.bow},
      {"vocab", rc.vocab},
      {"labels", rc.labels.empty() ? "(none)" : rc.labels},
      {"embeddings", rc.embeddings.empty() ? "(none)" : rc.embeddings},
      {"label-kind", labels ? (flags.regression ? "regression" : "classification") : "(none)"},
      {"topics", std::to_string(cfg.K)},
      {"alpha", fmt(cfg.resolved_alpha())},
      {"beta", fmt(cfg.beta)},
      {"eta", fmt(cfg.eta)},
      {"epsilon", fmt(cfg.epsilon)},
      {"hidden", std::to_string(cfg.h1) + "," + std::to_string(cfg.h2)},
      {"dropout", fmt(cfg.dropout_p)},
      {"l2", fmt(cfg.l2_ws_wc)},
      {"lr", fmt(cfg.learning_rate)},
      {"rounds", std::to_string(cfg.rounds)},
      {"pairs-per-round", std::to_string(cfg.pairs_per_round)},
      {"convergence-tol", fmt(cfg.convergence_tol)},
      {"mix-target", flags.mix_target},
      {"grad-path", flags.grad_path},
      {"min-embedded-words", std::to_string(flags.min_embedded_words)},
      {"seed", std::to_string(cfg.seed)},
      {"threads", std::to_string(cfg.threads)},
      {"out", flags.out},
  };
  echo_config("train", kv, std::cout);

  const TrainResult result = train(corpus, labels ? &*labels : nullptr,
                                   table ? &*table : nullptr, cfg);

  Checkpoint ckpt;
  ckpt.model = result.model;
  ckpt.label_kind = labels ? labels->kind : LabelKind::classification;
  ckpt.word_topic_mass = result.cache.word_sums;
  if (flags.save_messages) {
    Matrix msgs(corpus.num_entries(), cfg.K);
    msgs.data() = result.state.data;
    ckpt.messages = std::move(msgs);
  }
  save_checkpoint(ckpt, flags.out);

  if (!flags.log_path.empty()) {
    std::ofstream log(flags.log_path);
    if (!log) throw IoError("cannot write log: " + flags.log_path);
    echo_config("train", kv, log);
    log << "round,mean_message_delta,train_loss,train_accuracy,learning_rate,wall_ms\n";
    log.precision(17);
    for (const auto& e : result.log)
      log << e.round << "," << e.mean_message_delta << "," << e.train_loss << ","
          << e.train_accuracy << "," << e.learning_rate << "," << e.wall_ms << "\n";
  }

  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::cout << "trained " << result.log.size() << " round(s); final message delta "
              << last.mean_message_delta;
    if (std::isfinite(last.train_loss)) std::cout << ", loss " << last.train_loss;
    std::cout << "\n";
  }
  std::cout << "checkpoint written to " << flags.out << "\n";
  return 0;
}

struct InferFlags {
  std::string model, corpus, vocab, embeddings, out;
  int sweeps = 50;
  double tol = 1e-4;
  bool ablate = false;
  int threads = 0;  // 0 = all cores
  std::uint64_t seed = 0;
};

nalda::HeldoutResult run_inference(const InferFlags& flags, const ResolvedCorpus& rc,
                                   const nalda::Corpus& corpus, const nalda::Checkpoint& ckpt) {
  using namespace nalda;
  std::optional<EmbeddingTable> table;
  if (!rc.embeddings.empty() && ckpt.model.emb.enabled()) {
    table = load_embeddings(rc.embeddings, corpus);
    if (table->dim != ckpt.model.emb.wc.cols())
      throw nalda::ParseError("embedding dimension does not match the model");
  }
  InferOptions opts;
  opts.sweep_cap = flags.sweeps;
  opts.convergence_tol = flags.tol;
  opts.ablate_embeddings = flags.ablate;
  opts.threads = flags.threads;
  opts.seed = flags.seed;
  auto res = infer_heldout(corpus, table ? &*table : nullptr, ckpt.model, ckpt.word_topic_mass,
                           opts);
  if (res.unseen_words > 0)
    std::cerr << "warning: " << res.unseen_words
              << " held-out pair(s) use words unseen in training\n";
  return res;
}

int run_infer(const InferFlags& flags) {
  using namespace nalda;
  const Checkpoint ckpt = load_checkpoint(flags.model);
  const auto rc = resolve_corpus(flags.corpus, flags.vocab, "", flags.embeddings, "test");
  const Corpus corpus = load_corpus(rc.bow, rc.vocab);

  echo_config("infer",
              {{"model", flags.model},
               {"corpus", rc.bow},
               {"embeddings", rc.embeddings.empty() ? "(none)" : rc.embeddings},
               {"sweeps", std::to_string(flags.sweeps)},
               {"tol", fmt(flags.tol)},
               {"ablate-embeddings", flags.ablate ? "true" : "false"},
               {"seed", std::to_string(flags.seed)},
               {"threads", std::to_string(flags.threads)}},
              std::cout);

  const auto res = run_inference(flags, rc, corpus, ckpt);
  const Matrix& out_mat = ckpt.model.head_enabled ? res.output : res.theta;

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!flags.out.empty() && flags.out != "-") {
    file.open(flags.out);
    if (!file) throw IoError("cannot write: " + flags.out);
    out = &file;
  }
  out->precision(17);
  for (int d = 0; d < out_mat.rows(); ++d) {
    for (int c = 0; c < out_mat.cols(); ++c) (*out) << (c ? "\t" : "") << out_mat(d, c);
    (*out) << "\n";
  }
  return 0;
}

struct EvalFlags {
  InferFlags infer;
  std::string labels, reference, coherence = "npmi", csv, out;
  int top_n = 15;
  bool text = false;
};

int run_eval(const EvalFlags& flags) {
  using namespace nalda;
  const Checkpoint ckpt = load_checkpoint(flags.infer.model);
  const auto rc = resolve_corpus(flags.infer.corpus, flags.infer.vocab, flags.labels,
                                 flags.infer.embeddings, "test");
  const Corpus corpus = load_corpus(rc.bow, rc.vocab);

  echo_config("eval",
              {{"model", flags.infer.model},
               {"corpus", rc.bow},
               {"labels", rc.labels.empty() ? "(none)" : rc.labels},
               {"coherence", flags.coherence},
               {"top-n", std::to_string(flags.top_n)},
               {"seed", std::to_string(flags.infer.seed)},
               {"threads", std::to_string(flags.infer.threads)}},
              std::cout);

  EvalReport report;
  report.num_docs = corpus.num_docs;
  report.top_n = flags.top_n;

  const auto res = run_inference(flags.infer, rc, corpus, ckpt);

  if (ckpt.model.head_enabled && ckpt.label_kind == LabelKind::classification &&
      !rc.labels.empty()) {
    const LabelSet truth = load_labels(rc.labels, corpus, LabelKind::classification);
    report.num_classes = ckpt.model.head.output_dim();
    const auto metrics = classification_metrics(res.output, truth);
    report.cross_entropy = metrics.cross_entropy;
    report.accuracy = metrics.accuracy;
  }

  // Topics and coherence from the trained mass; the reference corpus defaults
  // to the training split when it sits next to the held-out one.
  {
    const Matrix phi = phi_from_word_mass(ckpt.word_topic_mass, ckpt.model.lda.beta);

    std::vector<std::string> train_vocab = corpus.vocabulary;
    train_vocab.resize(static_cast<std::size_t>(phi.cols()));
    report.top_words = topic_top_words(phi, train_vocab, std::min(flags.top_n, phi.cols()));

    std::string ref_path = flags.reference;
    if (ref_path.empty() && !rc.dir.empty() && fs::exists(fs::path(rc.dir) / "train.bow"))
      ref_path = (fs::path(rc.dir) / "train.bow").string();
    const Corpus* reference = &corpus;
    Corpus ref_corpus;
    if (!ref_path.empty() && ref_path != rc.bow) {
      ref_corpus = load_corpus(ref_path, rc.vocab);
      reference = &ref_corpus;
    }
    const auto measure =
        flags.coherence == "umass" ? CoherenceMeasure::umass : CoherenceMeasure::npmi;
    const auto coh = coherence(report.top_words, *reference, measure);
    report.coherence_measure = flags.coherence;
    report.coherence_per_topic = coh.per_topic;
    report.coherence_mean = coh.mean;
  }

  const auto json = to_json(report);
  if (!flags.out.empty() && flags.out != "-") {
    std::ofstream file(flags.out);
    if (!file) throw IoError("cannot write: " + flags.out);
    file << json.dump(2) << "\n";
  } else {
    std::cout << json.dump(2) << "\n";
  }
  if (flags.text) std::cout << to_text(report);
  if (!flags.csv.empty()) write_coherence_csv(report, flags.csv);
  return 0;
}

int run_topics(const std::string& model_path, const std::string& corpus_arg,
               const std::string& vocab_flag, int top_n) {
  using namespace nalda;
  const Checkpoint ckpt = load_checkpoint(model_path);

  std::string vocab_path = vocab_flag;
  if (vocab_path.empty() && !corpus_arg.empty()) {
    if (fs::is_directory(corpus_arg) && fs::exists(fs::path(corpus_arg) / "vocab.txt"))
      vocab_path = (fs::path(corpus_arg) / "vocab.txt").string();
    else
      vocab_path = corpus_arg;
  }
  if (vocab_path.empty()) throw IoError("pass --vocab or a dataset directory");

  std::ifstream in(vocab_path);
  if (!in) throw IoError("cannot open vocabulary file: " + vocab_path);
  std::vector<std::string> vocab;
  std::string line;
  int line_no = 0;
  while (nalda::detail::next_content_line(in, line, line_no)) vocab.push_back(line);
  if (static_cast<int>(vocab.size()) < ckpt.word_topic_mass.rows())
    throw ParseError("vocabulary shorter than the model's word axis");
  vocab.resize(static_cast<std::size_t>(ckpt.word_topic_mass.rows()));

  const Matrix phi = phi_from_word_mass(ckpt.word_topic_mass, ckpt.model.lda.beta);
  const auto tops = topic_top_words(phi, vocab, std::min(top_n, phi.cols()));
  for (std::size_t k = 0; k < tops.size(); ++k) {
    std::cout << "topic " << (k + 1) << ":";
    for (const auto& w : tops[k]) std::cout << " " << w;
    std::cout << "\n";
  }
  return 0;
}

struct SynthFlags {
  std::string preset, out, label_rule = "argmax";
  std::string word_dist = "dirichlet";
  nalda::SynthSpec spec;
  double heldout_frac = 0.25;
  double shadow_frac = 0.0;
  double test_doc_length = 0.0;
};

int run_synth(SynthFlags flags) {
  using namespace nalda;
  if (flags.preset == "two-topic") {
    flags.spec.words = 50;
    flags.spec.k_true = 2;
    flags.spec.classes = 2;
    flags.spec.doc_length = 30;
    if (flags.spec.docs == 200) flags.spec.docs = 400;
  } else if (flags.preset == "three-topic") {
    flags.spec.words = 60;
    flags.spec.k_true = 3;
    flags.spec.classes = 3;
    flags.spec.doc_length = 40;
    if (flags.spec.docs == 200) flags.spec.docs = 400;
  } else if (!flags.preset.empty()) {
    throw std::invalid_argument("unknown preset: " + flags.preset);
  }
  flags.spec.label_rule = flags.label_rule == "threshold"
                              ? SynthSpec::LabelRule::threshold_theta1
                              : SynthSpec::LabelRule::argmax_theta;
  flags.spec.word_distribution = flags.word_dist == "pool"
                                     ? SynthSpec::WordDistribution::disjoint_uniform
                                     : SynthSpec::WordDistribution::dirichlet;

  SplitSpec split;
  split.test_docs = static_cast<int>(flags.spec.docs * flags.heldout_frac);
  split.train_docs = flags.spec.docs - split.test_docs;
  split.shadow_fraction = flags.shadow_frac;
  split.test_doc_length = flags.test_doc_length;

  echo_config("synth",
              {{"docs", std::to_string(flags.spec.docs)},
               {"words", std::to_string(flags.spec.words)},
               {"k-true", std::to_string(flags.spec.k_true)},
               {"classes", std::to_string(flags.spec.classes)},
               {"doc-length", fmt(flags.spec.doc_length)},
               {"sharpness", fmt(flags.spec.topic_sharpness)},
               {"theta-concentration", fmt(flags.spec.theta_concentration)},
               {"label-rule", flags.label_rule},
               {"word-dist", flags.word_dist},
               {"embed-dim", std::to_string(flags.spec.embed_dim)},
               {"embed-noise", fmt(flags.spec.embed_noise)},
               {"heldout-frac", fmt(flags.heldout_frac)},
               {"shadow-frac", fmt(flags.shadow_frac)},
               {"seed", std::to_string(flags.spec.seed)},
               {"out", flags.out}},
              std::cout);

  const SynthSplit data = generate_split(flags.spec, split);
  write_dataset(data, flags.out);
  std::cout << "dataset written to " << flags.out << " (" << split.train_docs << " train / "
            << split.test_docs << " test docs)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topic modeling by message passing over a word network"};
  app.require_subcommand(1);

  // train
  CommonTrainFlags tf;
  std::string config_path;  // shared --config slot; expanded before parsing
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--corpus", tf.corpus, "corpus: dataset dir, prefix, or .bow file")
      ->required();
  train_cmd->add_option("--vocab", tf.vocab, "vocabulary file");
  train_cmd->add_option("--labels", tf.labels, "label file");
  train_cmd->add_option("--embeddings", tf.embeddings, "word2vec text embeddings");
  train_cmd->add_flag("--regression", tf.regression, "labels are real-valued");
  train_cmd->add_flag("--unsupervised", tf.unsupervised, "ignore labels; plain BP-LDA");
  train_cmd->add_option("-K,--topics", tf.cfg.K, "number of topics");
  train_cmd->add_option("--alpha", tf.cfg.alpha, "document-side smoothing (default 50/K)");
  train_cmd->add_option("--beta", tf.cfg.beta, "word-side smoothing");
  train_cmd->add_option("--eta", tf.cfg.eta, "supervised mixing weight");
  train_cmd->add_option("--epsilon", tf.cfg.epsilon, "regression neighborhood radius");
  train_cmd->add_option("--hidden", tf.hidden, "head hidden sizes H1,H2");
  train_cmd->add_option("--dropout", tf.cfg.dropout_p, "head dropout probability");
  train_cmd->add_option("--l2", tf.cfg.l2_ws_wc, "L2 weight on the scaling and embedding maps");
  train_cmd->add_option("--lr", tf.cfg.learning_rate, "SGD learning rate");
  train_cmd->add_option("--rounds", tf.cfg.rounds, "training rounds");
  train_cmd->add_option("--pairs-per-round", tf.cfg.pairs_per_round, "sampled pairs per round");
  train_cmd->add_option("--convergence-tol", tf.cfg.convergence_tol,
                        "stop when the mean message change drops below this");
  train_cmd->add_option("--seed", tf.cfg.seed, "random seed");
  train_cmd->add_option("--threads", tf.cfg.threads, "worker threads (0 = all cores)");
  train_cmd->add_option("--mix-target", tf.mix_target, "doc|word")
      ->check(CLI::IsMember({"doc", "word"}));
  train_cmd->add_option("--grad-path", tf.grad_path, "unroll1|none")
      ->check(CLI::IsMember({"unroll1", "none"}));
  train_cmd->add_option("--min-embedded-words", tf.min_embedded_words,
                        "drop documents with fewer embedded tokens");
  train_cmd->add_flag("--save-messages", tf.save_messages, "store messages in the checkpoint");
  train_cmd->add_option("--out", tf.out, "checkpoint path");
  train_cmd->add_option("--log", tf.log_path, "per-round CSV log path");

  // infer
  InferFlags inf;
  auto* infer_cmd = app.add_subcommand("infer", "score held-out documents");
  infer_cmd->add_option("--config", config_path, "key=value config file");
  infer_cmd->add_option("--model", inf.model, "checkpoint path")->required();
  infer_cmd->add_option("--heldout,--corpus", inf.corpus, "held-out corpus")->required();
  infer_cmd->add_option("--vocab", inf.vocab, "vocabulary file");
  infer_cmd->add_option("--embeddings", inf.embeddings, "embeddings file");
  infer_cmd->add_option("--sweeps", inf.sweeps, "held-out sweep cap");
  infer_cmd->add_option("--convergence-tol", inf.tol, "held-out convergence tolerance");
  infer_cmd->add_flag("--ablate-embeddings", inf.ablate, "force the embedding factor to uniform");
  infer_cmd->add_option("--seed", inf.seed, "random seed");
  infer_cmd->add_option("--threads", inf.threads, "worker threads (0 = all cores)");
  infer_cmd->add_option("--out", inf.out, "output TSV ('-' = stdout)");

  // eval
  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on held-out data");
  eval_cmd->add_option("--config", config_path, "key=value config file");
  eval_cmd->add_option("--model", ef.infer.model, "checkpoint path")->required();
  eval_cmd->add_option("--heldout,--corpus", ef.infer.corpus, "held-out corpus")->required();
  eval_cmd->add_option("--vocab", ef.infer.vocab, "vocabulary file");
  eval_cmd->add_option("--labels", ef.labels, "held-out label file");
  eval_cmd->add_option("--embeddings", ef.infer.embeddings, "embeddings file");
  eval_cmd->add_option("--reference", ef.reference, "reference corpus for coherence");
  eval_cmd->add_option("--coherence", ef.coherence, "umass|npmi")
      ->check(CLI::IsMember({"umass", "npmi"}));
  eval_cmd->add_option("--top-n", ef.top_n, "top words per topic");
  eval_cmd->add_option("--sweeps", ef.infer.sweeps, "held-out sweep cap");
  eval_cmd->add_option("--convergence-tol", ef.infer.tol, "held-out convergence tolerance");
  eval_cmd->add_flag("--ablate-embeddings", ef.infer.ablate, "force the embedding factor to uniform");
  eval_cmd->add_option("--seed", ef.infer.seed, "random seed");
  eval_cmd->add_option("--threads", ef.infer.threads, "worker threads (0 = all cores)");
  eval_cmd->add_option("--emit-csv", ef.csv, "write per-topic coherence CSV");
  eval_cmd->add_option("--out", ef.out, "report JSON path ('-' = stdout)");
  eval_cmd->add_flag("--text", ef.text, "also print the aligned-column report");

  // topics
  std::string topics_model, topics_corpus, topics_vocab;
  int topics_n = 15;
  auto* topics_cmd = app.add_subcommand("topics", "print top words per topic");
  topics_cmd->add_option("--model", topics_model, "checkpoint path")->required();
  topics_cmd->add_option("--corpus", topics_corpus, "dataset dir or vocabulary file");
  topics_cmd->add_option("--vocab", topics_vocab, "vocabulary file");
  topics_cmd->add_option("--top-n", topics_n, "words per topic");

  // synth
  SynthFlags sf;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--config", config_path, "key=value config file");
  synth_cmd->add_option("--preset", sf.preset, "two-topic|three-topic");
  synth_cmd->add_option("--docs", sf.spec.docs, "total documents");
  synth_cmd->add_option("--words", sf.spec.words, "vocabulary size");
  synth_cmd->add_option("--ktrue", sf.spec.k_true, "true topic count");
  synth_cmd->add_option("--classes", sf.spec.classes, "label classes");
  synth_cmd->add_option("--doc-length", sf.spec.doc_length, "mean tokens per document");
  synth_cmd->add_option("--sharpness", sf.spec.topic_sharpness, "topic Dirichlet concentration");
  synth_cmd->add_option("--theta-concentration", sf.spec.theta_concentration,
                        "document Dirichlet concentration");
  synth_cmd->add_option("--label-rule", sf.label_rule, "argmax|threshold")
      ->check(CLI::IsMember({"argmax", "threshold"}));
  synth_cmd->add_option("--word-dist", sf.word_dist,
                        "dirichlet | pool (topics own disjoint vocabulary slices)")
      ->check(CLI::IsMember({"dirichlet", "pool"}));
  synth_cmd->add_option("--test-doc-length", sf.test_doc_length,
                        "mean held-out document length (0 = same as --doc-length)");
  synth_cmd->add_option("--embed-dim", sf.spec.embed_dim, "embedding dimension");
  synth_cmd->add_option("--embed-noise", sf.spec.embed_noise, "embedding jitter stddev");
  synth_cmd->add_option("--heldout-frac", sf.heldout_frac, "held-out fraction");
  synth_cmd->add_option("--shadow-frac", sf.shadow_frac,
                        "probability a test token flips to an unseen twin word");
  synth_cmd->add_option("--seed", sf.spec.seed, "random seed");
  synth_cmd->add_option("--out", sf.out, "output dataset directory")->required();

  const std::map<std::string, CLI::App*> subs = {{"train", train_cmd},
                                                 {"infer", infer_cmd},
                                                 {"eval", eval_cmd},
                                                 {"topics", topics_cmd},
                                                 {"synth", synth_cmd}};
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    for (const auto& a : args) {
      auto it = subs.find(a);
      if (it != subs.end()) {
        args = expand_config(args, it->second);
        break;
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
    if (*train_cmd) return run_train(tf);
    if (*infer_cmd) return run_infer(inf);
    if (*eval_cmd) return run_eval(ef);
    if (*topics_cmd) return run_topics(topics_model, topics_corpus, topics_vocab, topics_n);
    if (*synth_cmd) return run_synth(sf);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const nalda::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
