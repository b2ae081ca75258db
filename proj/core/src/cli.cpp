#include "narrsum/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "narrsum/abstractor.hpp"
#include "narrsum/baselines.hpp"
#include "narrsum/checkpoint.hpp"
#include "narrsum/config.hpp"
#include "narrsum/corpus.hpp"
#include "narrsum/extractor.hpp"
#include "narrsum/oracle.hpp"
#include "narrsum/pipeline.hpp"
#include "narrsum/rl.hpp"
#include "narrsum/synthgen.hpp"

namespace narrsum::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data_root;
  std::string out = "out";
};

struct Context {
  RunConfig config;
  fs::path out;
  std::ostream& log;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("failed writing " + path.string());
}

Dataset load_data(const Context& ctx) {
  if (ctx.config.data_root.empty()) throw UsageError("--data-root is required");
  LoadDiagnostics diagnostics;
  Dataset d = load_dataset(ctx.config.data_root, &diagnostics);
  for (const auto& w : diagnostics.warnings) ctx.log << "warning: " << w << "\n";
  return d;
}

nlohmann::json vocab_json(const Vocab& vocab) { return vocab.ranked_tokens(); }

Vocab vocab_from_meta(const ad::CheckpointData& data) {
  if (!data.meta.contains("vocab")) throw DataError("checkpoint has no vocabulary");
  return Vocab(data.meta.at("vocab").get<std::vector<std::string>>());
}

ad::CheckpointData open_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string());
  try {
    return ad::read_checkpoint(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

void check_hash(const ad::CheckpointData& data, const std::string& expected, const fs::path& path) {
  if (data.config_hash != expected) {
    throw DataError("checkpoint/config hash mismatch for " + path.string());
  }
}

void load_into(const ad::CheckpointData& data, const std::string& prefix, ad::ParameterSet& params) {
  try {
    ad::load_parameters(data, prefix, params);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

std::vector<oracle::OracleAlignment> read_alignments_or_fail(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing alignments " + path.string() + "; run oracle first");
  return oracle::read_alignments(path);
}

const Example* find_example(const Split& split, const std::string& id) {
  for (const auto& ex : split.examples) {
    if (ex.document.id == id) return &ex;
  }
  return nullptr;
}

std::vector<extractor::ExtractorExample> extractor_examples(
    const Split& split, std::span<const oracle::OracleAlignment> alignments, const Vocab& vocab) {
  std::vector<extractor::ExtractorExample> out;
  for (const auto& a : alignments) {
    const Example* ex = find_example(split, a.report_id);
    if (!ex) continue;
    out.push_back({a.report_id, pipeline::encode_document(vocab, ex->document), a.targets});
  }
  return out;
}

std::vector<abstractor::Pair> abstractor_pairs(const Split& split,
                                               std::span<const oracle::OracleAlignment> alignments,
                                               const Vocab& vocab) {
  std::vector<abstractor::Pair> out;
  for (const auto& a : alignments) {
    const Example* ex = find_example(split, a.report_id);
    if (!ex) continue;
    for (const auto& p : oracle::abstractor_pairs(*ex, a)) {
      out.push_back({vocab.encode(p.source), vocab.encode(p.target)});
    }
  }
  return out;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ingest(Context& ctx) {
  const Dataset d = load_data(ctx);
  const Vocab vocab = pipeline::training_vocab(d.training, ctx.config.vocab_size);
  write_file(ctx.out / "manifest.json", manifest_json(d));
  std::string tokens;
  for (const auto& t : vocab.ranked_tokens()) tokens += t + "\n";
  write_file(ctx.out / "vocab.txt", tokens);
  ctx.log << "ingested " << d.training.examples.size() << "/" << d.validation.examples.size()
          << "/" << d.testing.examples.size() << " reports; vocabulary " << vocab.size() << "\n";
  return kExitOk;
}

int cmd_oracle(Context& ctx) {
  const Dataset d = load_data(ctx);
  std::vector<std::string> warnings;
  const auto training = oracle::build_oracle(d.training, &warnings);
  const auto validation = oracle::build_oracle(d.validation, &warnings);
  for (const auto& w : warnings) ctx.log << "warning: " << w << "\n";
  fs::create_directories(ctx.out);
  oracle::write_alignments(ctx.out / "alignments.jsonl", training);
  oracle::write_alignments(ctx.out / "alignments_validation.jsonl", validation);
  ctx.log << "aligned " << training.size() << " training and " << validation.size()
          << " validation reports\n";
  return kExitOk;
}

int cmd_train_extractor(Context& ctx) {
  const Dataset d = load_data(ctx);
  const Vocab vocab = pipeline::training_vocab(d.training, ctx.config.vocab_size);
  const auto train_alignments = read_alignments_or_fail(ctx.out / "alignments.jsonl");
  std::vector<oracle::OracleAlignment> val_alignments;
  if (fs::exists(ctx.out / "alignments_validation.jsonl")) {
    val_alignments = oracle::read_alignments(ctx.out / "alignments_validation.jsonl");
  }
  const auto training = extractor_examples(d.training, train_alignments, vocab);
  const auto validation = extractor_examples(d.validation, val_alignments, vocab);
  if (training.empty()) throw DataError("no training examples for the extractor");

  extractor::Extractor model(ctx.config.extractor_config(vocab.size()), ctx.config.seed);
  if (!ctx.config.embeddings_path.empty()) {
    const auto n = model.load_embeddings(ctx.config.embeddings_path, [&](const std::string& t) {
      return vocab.id(t);
    });
    ctx.log << "loaded " << n << " pretrained embedding rows\n";
  }
  model.params().at("embedding").frozen = ctx.config.freeze_embeddings;
  const fs::path ckpt = ctx.out / "extractor.ckpt";
  const nlohmann::json meta = {{"kind", "extractor"}, {"vocab", vocab_json(vocab)}};
  auto save = [&] { ad::save_checkpoint(ckpt, {{"extractor", &model.params()}}, model.config_hash(), meta); };
  extractor::TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t) { save(); };
  const auto result =
      extractor::train_extractor(model, training, validation, ctx.config.extractor_train_config(), hooks);
  save();
  std::string curve = "epoch,mean_loss,step_accuracy,validation_loss,lr\n";
  for (const auto& e : result.epochs) {
    curve += std::to_string(e.epoch) + "," + csv_number(e.mean_loss) + "," +
             csv_number(e.step_accuracy) + "," + csv_number(e.validation_loss) + "," +
             csv_number(e.lr) + "\n";
    ctx.log << "extractor epoch " << e.epoch << " loss " << e.mean_loss << " acc "
            << e.step_accuracy << "\n";
  }
  for (const auto& w : result.warnings) ctx.log << "warning: " << w << "\n";
  write_file(ctx.out / "extractor_curve.csv", curve);
  return kExitOk;
}

int cmd_train_abstractor(Context& ctx) {
  const Dataset d = load_data(ctx);
  const Vocab vocab = pipeline::training_vocab(d.training, ctx.config.vocab_size);
  const auto train_alignments = read_alignments_or_fail(ctx.out / "alignments.jsonl");
  std::vector<oracle::OracleAlignment> val_alignments;
  if (fs::exists(ctx.out / "alignments_validation.jsonl")) {
    val_alignments = oracle::read_alignments(ctx.out / "alignments_validation.jsonl");
  }
  const auto training = abstractor_pairs(d.training, train_alignments, vocab);
  const auto validation = abstractor_pairs(d.validation, val_alignments, vocab);
  if (training.empty()) throw DataError("no training pairs for the abstractor");

  abstractor::Abstractor model(ctx.config.abstractor_config(vocab.size()), ctx.config.seed);
  const fs::path ckpt = ctx.out / "abstractor.ckpt";
  const nlohmann::json meta = {{"kind", "abstractor"}, {"vocab", vocab_json(vocab)}};
  auto save = [&] { ad::save_checkpoint(ckpt, {{"abstractor", &model.params()}}, model.config_hash(), meta); };
  abstractor::TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t) { save(); };
  const auto result = abstractor::train_abstractor(model, training, validation,
                                                   ctx.config.abstractor_train_config(), hooks);
  save();
  std::string curve = "epoch,mean_loss,token_accuracy,validation_loss,lr\n";
  for (const auto& e : result.epochs) {
    curve += std::to_string(e.epoch) + "," + csv_number(e.mean_loss) + "," +
             csv_number(e.token_accuracy) + "," + csv_number(e.validation_loss) + "," +
             csv_number(e.lr) + "\n";
    ctx.log << "abstractor epoch " << e.epoch << " loss " << e.mean_loss << " acc "
            << e.token_accuracy << "\n";
  }
  for (const auto& w : result.warnings) ctx.log << "warning: " << w << "\n";
  write_file(ctx.out / "abstractor_curve.csv", curve);
  return kExitOk;
}

struct LoadedModels {
  Vocab vocab;
  std::unique_ptr<extractor::Extractor> extractor;
  std::unique_ptr<rl::Critic> critic;
  std::unique_ptr<abstractor::Abstractor> abstractor;
};

LoadedModels load_extractor(const Context& ctx, const fs::path& path, bool with_critic) {
  LoadedModels m;
  const auto data = open_checkpoint(path);
  m.vocab = vocab_from_meta(data);
  m.extractor = std::make_unique<extractor::Extractor>(ctx.config.extractor_config(m.vocab.size()),
                                                       ctx.config.seed);
  check_hash(data, m.extractor->config_hash(), path);
  load_into(data, "extractor", m.extractor->params());
  m.critic = std::make_unique<rl::Critic>(ctx.config.hidden_dim, ctx.config.seed);
  if (with_critic) load_into(data, "critic", m.critic->params());
  return m;
}

void load_abstractor(const Context& ctx, LoadedModels& m, const fs::path& path) {
  m.abstractor = std::make_unique<abstractor::Abstractor>(
      ctx.config.abstractor_config(m.vocab.size()), ctx.config.seed);
  const auto data = open_checkpoint(path);
  check_hash(data, m.abstractor->config_hash(), path);
  if (vocab_from_meta(data).ranked_tokens() != m.vocab.ranked_tokens()) {
    throw DataError("extractor and abstractor checkpoints use different vocabularies");
  }
  load_into(data, "abstractor", m.abstractor->params());
}

int cmd_train_rl(Context& ctx) {
  const Dataset d = load_data(ctx);
  LoadedModels m = load_extractor(ctx, ctx.out / "extractor.ckpt", false);
  m.extractor->params().at("embedding").frozen = ctx.config.freeze_embeddings;
  load_abstractor(ctx, m, ctx.out / "abstractor.ckpt");
  const auto alignments = read_alignments_or_fail(ctx.out / "alignments.jsonl");

  std::vector<rl::Episode> episodes;
  for (const auto& a : alignments) {
    const Example* ex = find_example(d.training, a.report_id);
    if (!ex) continue;
    episodes.push_back({a.report_id, pipeline::encode_document(m.vocab, ex->document),
                        sentence_tokens(ex->summaries.summaries.at(a.chosen_summary).sentences)});
  }
  if (episodes.empty()) throw DataError("no RL episodes");
  rl::AbstractorRewriter rewriter(*m.abstractor, m.vocab, ctx.config.decode_config());
  const double before = rl::mean_greedy_reward(episodes, *m.extractor, *m.critic, rewriter);
  const auto result = rl::train_rl(episodes, *m.extractor, *m.critic, rewriter, ctx.config.rl_config());
  const double after = rl::mean_greedy_reward(episodes, *m.extractor, *m.critic, rewriter);
  for (const auto& w : result.warnings) ctx.log << "warning: " << w << "\n";
  ctx.log << "greedy reward " << before << " -> " << after << "\n";

  const nlohmann::json meta = {{"kind", "extractor_rl"}, {"vocab", vocab_json(m.vocab)}};
  ad::save_checkpoint(ctx.out / "extractor_rl.ckpt",
                      {{"extractor", &m.extractor->params()}, {"critic", &m.critic->params()}},
                      m.extractor->config_hash(), meta);
  fs::create_directories(ctx.out);
  rl::write_curve_csv(ctx.out / "rl_curve.csv", result.curve);
  return kExitOk;
}

void write_summaries(const fs::path& dir, const std::map<std::string, std::vector<TokenList>>& s) {
  fs::create_directories(dir);
  for (const auto& [id, sentences] : s) write_file(dir / (id + ".txt"), pipeline::detokenize(sentences));
}

int cmd_summarize(Context& ctx, const std::string& split_name, bool pointer_only) {
  const Dataset d = load_data(ctx);
  fs::path ext_path = ctx.out / "extractor_rl.ckpt";
  const bool rl_trained = fs::exists(ext_path);
  if (!rl_trained) ext_path = ctx.out / "extractor.ckpt";
  LoadedModels m = load_extractor(ctx, ext_path, rl_trained);
  std::unique_ptr<rl::Rewriter> rewriter;
  if (pointer_only) {
    rewriter = std::make_unique<rl::VocabRewriter>(m.vocab);
  } else {
    load_abstractor(ctx, m, ctx.out / "abstractor.ckpt");
    rewriter = std::make_unique<rl::AbstractorRewriter>(*m.abstractor, m.vocab, ctx.config.decode_config());
  }
  std::map<std::string, std::vector<TokenList>> summaries;
  for (const auto& ex : d.split(split_name).examples) {
    summaries[ex.document.id] =
        pipeline::summarize(ex.document, m.vocab, *m.extractor, *rewriter, ctx.config.word_limit);
  }
  write_summaries(ctx.out / "summaries", summaries);
  ctx.log << "wrote " << summaries.size() << " summaries\n";
  return kExitOk;
}

int cmd_baseline(Context& ctx, const std::string& method, const std::string& split_name) {
  const Dataset d = load_data(ctx);
  std::map<std::string, std::vector<TokenList>> summaries;
  std::string extractions;
  for (const auto& ex : d.split(split_name).examples) {
    if (ex.document.sentences.empty()) continue;
    const auto sentences = sentence_tokens(ex.document.sentences);
    std::vector<std::size_t> indices;
    if (method == "textrank") {
      indices = baselines::textrank(sentences, ctx.config.word_limit);
    } else if (method == "lexrank") {
      indices = baselines::lexrank(sentences, ctx.config.word_limit);
    } else {
      indices = baselines::lead_n(sentences, ctx.config.word_limit);
    }
    summaries[ex.document.id] = pipeline::emit_extraction(ex.document, indices, ctx.config.word_limit);
    extractor::Extraction e;
    e.report_id = ex.document.id;
    e.indices = indices;
    extractions += extractor::extraction_json_line(e) + "\n";
  }
  write_summaries(ctx.out / method, summaries);
  write_file(ctx.out / (method + "_extractions.jsonl"), extractions);
  ctx.log << "wrote " << summaries.size() << " " << method << " summaries\n";
  return kExitOk;
}

int cmd_evaluate(Context& ctx, const std::vector<std::string>& pred_dirs, const std::string& split_name,
                 std::ostream& out) {
  const Dataset d = load_data(ctx);
  const auto aggregation = pipeline::parse_aggregation(ctx.config.aggregation);
  std::vector<pipeline::SystemReport> reports;
  for (const auto& dir_name : pred_dirs) {
    const fs::path dir(dir_name);
    if (!fs::is_directory(dir)) throw DataError("prediction directory not found: " + dir_name);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, std::vector<TokenList>> predictions;
    for (const auto& f : files) predictions[f.stem().string()] = pipeline::read_prediction(f);
    std::string name = fs::path(dir).lexically_normal().filename().string();
    if (name.empty()) name = fs::path(dir).lexically_normal().parent_path().filename().string();
    if (name.empty()) name = dir_name;
    reports.push_back(pipeline::evaluate_system(name, predictions, d.split(split_name), aggregation));
    if (!reports.back().excluded.empty()) {
      ctx.log << "diagnostics: " << name << " has " << reports.back().excluded.size()
              << " predictions without references (excluded)\n";
    }
  }
  write_file(ctx.out / "report.csv", pipeline::report_csv(reports));
  write_file(ctx.out / "report.txt", pipeline::report_text(reports));
  write_file(ctx.out / "documents.csv", pipeline::documents_csv(reports));
  out << pipeline::report_text(reports);
  return kExitOk;
}

int cmd_synthgen(Context& ctx, const std::string& spec_path, synthgen::SynthSpec spec) {
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw DataError("cannot read synthgen spec " + spec_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("synthgen spec: ") + e.what());
    }
    spec = synthgen::SynthSpec::from_json(j);
  }
  spec.validate();
  const auto corpus = synthgen::generate(spec);
  synthgen::write_corpus(corpus, spec, ctx.out);
  ctx.log << "generated " << corpus.training.size() << "/" << corpus.validation.size() << "/"
          << corpus.testing.size() << " reports (" << corpus.rerolls << " re-rolls)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Extract-then-paraphrase summarizer for long narrative reports", "narrsum"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "Random seed (overrides config)");
  app.add_option("--data-root", g.data_root, "Dataset root directory");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Load the dataset, write manifest and vocabulary");
  auto* oracle_cmd = app.add_subcommand("oracle", "Build oracle alignments");
  auto* train_ext = app.add_subcommand("train-extractor", "Cross-entropy training of the extractor");
  auto* train_abs = app.add_subcommand("train-abstractor", "Cross-entropy training of the abstractor");
  auto* train_rl = app.add_subcommand("train-rl", "Actor-critic training of the extractor");

  auto* summarize = app.add_subcommand("summarize", "Summarize a split");
  std::string summarize_split = "testing";
  bool pointer_only = false;
  summarize->add_option("--split", summarize_split)->check(CLI::IsMember({"training", "validation", "testing"}));
  summarize->add_flag("--pointer-only", pointer_only, "Skip the abstractor");

  auto* baseline = app.add_subcommand("baseline", "Run an extractive baseline");
  std::string method = "textrank";
  std::string baseline_split = "testing";
  baseline->add_option("--method", method)->check(CLI::IsMember({"textrank", "lexrank", "lead"}));
  baseline->add_option("--split", baseline_split)->check(CLI::IsMember({"training", "validation", "testing"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score prediction directories");
  std::vector<std::string> pred_dirs;
  std::string evaluate_split = "testing";
  evaluate->add_option("--pred", pred_dirs, "Directory of <report_id>.txt predictions")->required();
  evaluate->add_option("--split", evaluate_split)->check(CLI::IsMember({"training", "validation", "testing"}));

  auto* synth = app.add_subcommand("synthgen", "Generate a synthetic corpus under --out");
  std::string spec_path;
  synthgen::SynthSpec spec;
  synth->add_option("--spec", spec_path, "JSON generator spec");
  synth->add_option("--reports", spec.n_reports);
  synth->add_option("--sentences", spec.sentences_per_report);
  synth->add_option("--summary-sentences", spec.summary_sentences);
  synth->add_option("--vocabulary", spec.vocabulary_size);
  synth->add_option("--noise", spec.noise_rate);
  synth->add_option("--validation-reports", spec.validation_reports);
  synth->add_option("--testing-reports", spec.testing_reports);
  synth->add_option("--summaries-per-report", spec.summaries_per_report);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    Context ctx{{}, g.out, err};
    if (!g.config_path.empty()) ctx.config = RunConfig::load(g.config_path);
    if (g.seed) ctx.config.seed = *g.seed;
    if (!g.data_root.empty()) ctx.config.data_root = g.data_root;
    ctx.config.validate();

    if (*synth) {
      if (g.seed) spec.seed = *g.seed;
      return cmd_synthgen(ctx, spec_path, spec);
    }
    if (ctx.config.data_root.empty()) throw UsageError("--data-root is required");
    if (*ingest) return cmd_ingest(ctx);
    if (*oracle_cmd) return cmd_oracle(ctx);
    if (*train_ext) return cmd_train_extractor(ctx);
    if (*train_abs) return cmd_train_abstractor(ctx);
    if (*train_rl) return cmd_train_rl(ctx);
    if (*summarize) return cmd_summarize(ctx, summarize_split, pointer_only);
    if (*baseline) return cmd_baseline(ctx, method, baseline_split);
    if (*evaluate) return cmd_evaluate(ctx, pred_dirs, evaluate_split, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace narrsum::cli
