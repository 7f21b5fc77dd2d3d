// Command-line entry points for the assessment harness.
//
//   ipaeval assess       two-stage assessment over a session corpus
//   ipaeval outcome      paired-phase treatment-outcome evaluation
//   ipaeval metrics      score a predictions artifact against references
//   ipaeval stats        corpus statistics
//   ipaeval build-pairs  extract initial-stage sessions into phase pairs
//   ipaeval report       human-readable summary of an artifact

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ipaeval/ipaeval.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::string provider;
  std::string model;
  std::string script_file;
  std::string cassette_file;
  std::string test_file;
  std::string reasoning_template;
  std::string assessment_template;
  int runs = -1;
  int concurrency = -1;
  double temperature = -1.0;
  bool ablate = false;
  std::string positive_class;
  std::string out_dir;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "JSON run-config file");
  cmd->add_option("--provider", args.provider,
                  "scripted | cassette | openai | mistral | fireworks | together | custom");
  cmd->add_option("--model", args.model, "model identifier sent to the provider");
  cmd->add_option("--script", args.script_file, "scripted-provider rules file");
  cmd->add_option("--cassette", args.cassette_file, "cassette file for replay");
  cmd->add_option("--test", args.test_file, "psychometric test definition (default: bundled SCL-90)");
  cmd->add_option("--reasoning-template", args.reasoning_template, "stage-1 template file");
  cmd->add_option("--assessment-template", args.assessment_template, "stage-2 template file");
  cmd->add_option("--runs", args.runs, "independent runs per input (default 3)");
  cmd->add_option("--concurrency", args.concurrency, "max in-flight provider calls");
  cmd->add_option("--temperature", args.temperature, "sampling temperature (default 0)");
  cmd->add_flag("--ablate-reasoning", args.ablate, "skip stage 1; assess without reasoning");
  cmd->add_option("--positive-class", args.positive_class,
                  "positive class for outcome metrics (worsened | maintained_or_improved)");
  cmd->add_option("--out", args.out_dir, "artifact output directory");
}

ipaeval::RunConfig resolve_config(const CommonArgs& args) {
  ipaeval::RunConfig config;
  if (!args.config_file.empty()) config = ipaeval::RunConfig::from_file(args.config_file);
  if (!args.provider.empty()) config.provider = args.provider;
  if (!args.model.empty()) config.model = args.model;
  if (!args.script_file.empty()) config.script_file = args.script_file;
  if (!args.cassette_file.empty()) config.cassette_file = args.cassette_file;
  if (!args.test_file.empty()) config.test_file = args.test_file;
  if (!args.reasoning_template.empty()) config.reasoning_template_file = args.reasoning_template;
  if (!args.assessment_template.empty()) config.assessment_template_file = args.assessment_template;
  if (args.runs >= 0) config.runs = args.runs;
  if (args.concurrency >= 0) config.concurrency = args.concurrency;
  if (args.temperature >= 0) config.temperature = args.temperature;
  if (args.ablate) config.ablate_reasoning = true;
  if (!args.positive_class.empty()) config.positive_class = args.positive_class;
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;
  return config;
}

ipaeval::Tokenizer parse_tokenizer(const std::string& name) {
  auto t = ipaeval::tokenizer_from_string(name);
  if (!t) throw ipaeval::ConfigError("unknown tokenizer: " + name);
  return *t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Client-informed psychological assessment and treatment-outcome evaluation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string corpus_path, sessions_path, pairs_path;
  std::string predictions_dir, references_dir;
  std::string tokenizer_name = "whitespace";
  std::string stats_out, artifact_dir;
  std::string exemplar_sessions, exemplar_pairs;
  int reference_run = 0;
  int shots = 5;

  auto* assess_cmd = app.add_subcommand("assess", "assess every session of a corpus");
  add_common_options(assess_cmd, args);
  assess_cmd->add_option("--corpus", corpus_path, "corpus file or directory")->required();

  auto* outcome_cmd = app.add_subcommand("outcome", "evaluate treatment outcomes over phase pairs");
  add_common_options(outcome_cmd, args);
  outcome_cmd->add_option("--sessions", sessions_path, "sessions file")->required();
  outcome_cmd->add_option("--pairs", pairs_path, "pair records file")->required();

  auto* metrics_cmd = app.add_subcommand("metrics", "score predictions against references");
  add_common_options(metrics_cmd, args);
  metrics_cmd->add_option("--predictions", predictions_dir, "predictions artifact dir")->required();
  metrics_cmd->add_option("--references", references_dir, "references artifact dir")->required();
  metrics_cmd->add_option("--reference-run", reference_run, "reference run index (default 0)");

  auto* stats_cmd = app.add_subcommand("stats", "corpus statistics");
  stats_cmd->add_option("--corpus", corpus_path, "corpus file or directory")->required();
  stats_cmd->add_option("--pairs", pairs_path, "optional pairs file for client counting");
  stats_cmd->add_option("--tokenizer", tokenizer_name, "whitespace | cjk_chars");
  stats_cmd->add_option("--out", stats_out, "write stats JSON here");

  auto* pairs_cmd = app.add_subcommand("build-pairs", "extract initial-stage sessions");
  add_common_options(pairs_cmd, args);
  pairs_cmd->add_option("--corpus", corpus_path, "full-session corpus")->required();
  pairs_cmd->add_option("--exemplar-sessions", exemplar_sessions, "exemplar sessions file")
      ->required();
  pairs_cmd->add_option("--exemplar-pairs", exemplar_pairs, "exemplar pairs file")->required();
  pairs_cmd->add_option("--shots", shots, "number of exemplars in the prompt (default 5)");

  auto* report_cmd = app.add_subcommand("report", "summarize an artifact directory");
  report_cmd->add_option("--artifact", artifact_dir, "artifact directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (assess_cmd->parsed()) {
      auto config = resolve_config(args);
      auto corpus = ipaeval::load_corpus(corpus_path);
      auto artifact = ipaeval::cmd_assess(config, corpus);
      std::cout << "wrote " << artifact.assessments.size() << " records, "
                << artifact.errors.size() << " errors to " << artifact.dir.string() << "\n";
    } else if (outcome_cmd->parsed()) {
      auto config = resolve_config(args);
      auto corpus = ipaeval::load_pair_corpus(sessions_path, pairs_path);
      auto artifact = ipaeval::cmd_outcome(config, corpus);
      std::cout << "wrote " << artifact.outcomes.size() << " records, " << artifact.errors.size()
                << " errors to " << artifact.dir.string() << "\n";
    } else if (metrics_cmd->parsed()) {
      auto config = resolve_config(args);
      ipaeval::MetricsOptions options;
      options.positive_class = config.positive_class;
      options.reference_run = reference_run;
      options.output_dir = config.output_dir;
      auto artifact = ipaeval::cmd_metrics(predictions_dir, references_dir, options);
      for (const auto& [name, ms] : artifact.aggregate.metrics) {
        std::cout << name << ": " << ipaeval::detail::format_fixed(ms.mean, 4) << "±"
                  << ipaeval::detail::format_fixed(ms.std, 2) << "\n";
      }
    } else if (stats_cmd->parsed()) {
      auto corpus = pairs_path.empty() ? ipaeval::load_corpus(corpus_path)
                                       : ipaeval::load_pair_corpus(corpus_path, pairs_path);
      auto stats = ipaeval::cmd_stats(corpus, parse_tokenizer(tokenizer_name), stats_out);
      std::cout << nlohmann::json(stats).dump(2) << "\n";
    } else if (pairs_cmd->parsed()) {
      auto config = resolve_config(args);
      auto corpus = ipaeval::load_corpus(corpus_path);
      auto exemplar_corpus = ipaeval::load_pair_corpus(exemplar_sessions, exemplar_pairs);
      std::vector<ipaeval::PhasePairExample> exemplars;
      for (const auto& ref : exemplar_corpus.corpus.pairs) {
        if (static_cast<int>(exemplars.size()) >= shots) break;
        exemplars.push_back({*exemplar_corpus.corpus.find_session(ref.initial_session_id),
                             *exemplar_corpus.corpus.find_session(ref.full_session_id)});
      }
      auto artifact = ipaeval::cmd_build_pairs(config, corpus, exemplars);
      std::cout << "wrote " << artifact.manifest["counts"]["pairs"] << " pairs, "
                << artifact.errors.size() << " errors to " << artifact.dir.string() << "\n";
    } else if (report_cmd->parsed()) {
      std::cout << ipaeval::cmd_report(artifact_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
