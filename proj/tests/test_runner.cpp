#include <doctest.h>

#include <filesystem>

#include "ipaeval/runner.hpp"
#include "oracles.hpp"

using namespace ipaeval;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures{IPAEVAL_FIXTURE_DIR};

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ipaeval-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig scripted_config(const std::string& script, const fs::path& out, int runs = 1) {
  RunConfig config;
  config.provider = "scripted";
  config.model = "fixture";
  config.script_file = (kFixtures / script).string();
  config.runs = runs;
  config.output_dir = out.string();
  return config;
}

}  // namespace

TEST_CASE("cmd_assess produces one record per session per run with std 0") {
  auto out = fresh_dir("assess-basic");
  auto config = scripted_config("script_clean5.json", out, 3);
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  auto artifact = cmd_assess(config, corpus);

  CHECK(artifact.assessments.size() == 15);  // 5 clients x 3 runs
  CHECK(artifact.errors.empty());
  for (const auto& [name, ms] : artifact.aggregate.metrics) CHECK(ms.std == 0.0);

  // identical records across runs, run_index aside
  for (const auto& record : artifact.assessments) {
    if (record.run_index == 0) continue;
    auto base = record;
    base.run_index = 0;
    bool found = false;
    for (const auto& other : artifact.assessments) {
      if (other == base) found = true;
    }
    CHECK(found);
  }

  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "records.jsonl"));
  CHECK(fs::exists(out / "errors.csv"));
  CHECK(fs::exists(out / "aggregate.json"));
}

TEST_CASE("cmd_assess records expected scores per client") {
  auto out = fresh_dir("assess-scores");
  auto config = scripted_config("script_clean5.json", out);
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  auto artifact = cmd_assess(config, corpus);

  REQUIRE(artifact.assessments.size() == 5);
  std::map<std::string, double> psdi_by_client;
  for (const auto& record : artifact.assessments)
    psdi_by_client[record.client_id] = psdi(record.scores).value;
  CHECK(psdi_by_client.at("C1") == 1.5);
  CHECK(psdi_by_client.at("C2") == 0.0);  // all zeros: addressed, nothing positive
  CHECK(psdi_by_client.at("C3") == 2.0);
  CHECK(psdi_by_client.at("C4") == 1.0);
  CHECK(psdi_by_client.at("C5") == 0.0);  // nothing addressed

  // stage-1 items decoded for every record
  for (const auto& record : artifact.assessments) CHECK(record.reasoning.size() == 1);
}

TEST_CASE("cmd_assess is byte-identical across invocations") {
  auto out_a = fresh_dir("assess-repro-a");
  auto out_b = fresh_dir("assess-repro-b");
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  cmd_assess(scripted_config("script_clean5.json", out_a, 3), corpus);
  cmd_assess(scripted_config("script_clean5.json", out_b, 3), corpus);

  for (const char* file : {"manifest.json", "records.jsonl", "errors.csv", "run_metrics.csv",
                           "aggregate.json"}) {
    CHECK(detail::read_file(out_a / file) == detail::read_file(out_b / file));
  }
}

TEST_CASE("concurrency does not change the artifact") {
  auto out_seq = fresh_dir("assess-seq");
  auto out_par = fresh_dir("assess-par");
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  cmd_assess(scripted_config("script_clean5.json", out_seq, 2), corpus);
  auto parallel = scripted_config("script_clean5.json", out_par, 2);
  parallel.concurrency = 4;
  cmd_assess(parallel, corpus);
  CHECK(detail::read_file(out_seq / "records.jsonl") == detail::read_file(out_par / "records.jsonl"));
  CHECK(detail::read_file(out_seq / "aggregate.json") == detail::read_file(out_par / "aggregate.json"));
}

TEST_CASE("a malformed transcript becomes one ingestion error, batch completes") {
  auto out = fresh_dir("assess-ingest");
  auto config = scripted_config("script_clean5.json", out);
  // corpus_dir: good.txt and extra.json parse; bad.txt does not; the scripted
  // rules have no per-client entries for these, so add a catch-all script
  config.script_file = (kFixtures / "script_catchall.json").string();
  auto corpus = load_corpus(kFixtures / "corpus_dir");
  auto artifact = cmd_assess(config, corpus);
  CHECK(artifact.assessments.size() == 2);
  REQUIRE(!artifact.errors.empty());
  bool has_ingestion = false;
  for (const auto& e : artifact.errors) {
    if (e.stage == "ingestion" && e.client_id == "bad.txt") has_ingestion = true;
  }
  CHECK(has_ingestion);
}

TEST_CASE("ablation flag empties reasoning without touching scores") {
  auto out_full = fresh_dir("assess-full");
  auto out_ablated = fresh_dir("assess-ablated");
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  auto full = cmd_assess(scripted_config("script_clean5.json", out_full), corpus);
  auto config = scripted_config("script_clean5.json", out_ablated);
  config.ablate_reasoning = true;
  auto ablated = cmd_assess(config, corpus);

  REQUIRE(full.assessments.size() == ablated.assessments.size());
  for (std::size_t i = 0; i < full.assessments.size(); ++i) {
    CHECK(ablated.assessments[i].reasoning.empty());
    CHECK(ablated.assessments[i].scores == full.assessments[i].scores);
    CHECK(ablated.assessments[i].client_id == full.assessments[i].client_id);
  }
}

TEST_CASE("cmd_outcome composes phase assessments per pair") {
  auto out = fresh_dir("outcome-basic");
  auto config = scripted_config("script_outcome.json", out, 3);
  auto corpus = load_pair_corpus(kFixtures / "outcome_sessions.jsonl",
                                 kFixtures / "outcome_pairs.jsonl");
  auto artifact = cmd_outcome(config, corpus);

  REQUIRE(artifact.outcomes.size() == 3);  // 1 pair x 3 runs
  for (const auto& record : artifact.outcomes) {
    CHECK(record.client_id == "P1");
    CHECK(record.psdi_initial.value == 1.5);
    CHECK(record.psdi_final.value == 1.0);
    CHECK(record.delta == -0.5);
    CHECK(record.direction == Direction::maintained_or_improved);
  }
  for (const auto& [name, ms] : artifact.aggregate.metrics) CHECK(ms.std == 0.0);

  // deterministic across runs
  auto a = artifact.outcomes[0];
  auto b = artifact.outcomes[1];
  b.initial.run_index = a.initial.run_index;
  b.final.run_index = a.final.run_index;
  CHECK(a == b);
}

TEST_CASE("a pair with mismatched client ids is logged, batch continues") {
  auto out = fresh_dir("outcome-mismatch");
  auto sessions = kFixtures / "outcome_mismatch_sessions.jsonl";
  auto pairs = kFixtures / "outcome_mismatch_pairs.jsonl";
  auto config = scripted_config("script_outcome.json", out, 1);
  auto corpus = load_pair_corpus(sessions, pairs);
  auto artifact = cmd_outcome(config, corpus);
  CHECK(artifact.outcomes.size() == 1);  // the well-formed pair
  REQUIRE(artifact.errors.size() == 1);
  CHECK(artifact.errors[0].stage == "pairing");
  CHECK(artifact.errors[0].client_id == "PX");
}

TEST_CASE("cmd_metrics: predictions equal to references score 1.0 with zero error") {
  auto out_pred = fresh_dir("metrics-pred");
  auto out_metrics = fresh_dir("metrics-out");
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  cmd_assess(scripted_config("script_clean5.json", out_pred, 2), corpus);

  MetricsOptions options;
  options.output_dir = out_metrics.string();
  auto metrics = cmd_metrics(out_pred, out_pred, options);
  CHECK(metrics.aggregate.metrics.at("accuracy").mean == 1.0);
  CHECK(metrics.aggregate.metrics.at("recall").mean == 1.0);
  CHECK(metrics.aggregate.metrics.at("f1_binary").mean == 1.0);
  CHECK(metrics.aggregate.metrics.at("mse").mean == 0.0);
  CHECK(metrics.aggregate.metrics.at("mae").mean == 0.0);
  CHECK(fs::exists(out_metrics / "metrics.csv"));
  CHECK(fs::exists(out_metrics / "metrics.json"));

  auto csv = detail::read_file(out_metrics / "metrics.csv");
  CHECK(csv.find("accuracy_mean") != std::string::npos);
  CHECK(csv.find("mse_mean") != std::string::npos);
}

TEST_CASE("cmd_metrics detection values match the naive oracle") {
  auto out_pred = fresh_dir("metrics-oracle-pred");
  auto out_ref = fresh_dir("metrics-oracle-ref");
  auto corpus = load_corpus(kFixtures / "corpus4.jsonl");
  cmd_assess(scripted_config("script_faulty4.json", out_pred), corpus);
  cmd_assess(scripted_config("script_clean4.json", out_ref), corpus);

  MetricsOptions options;
  auto metrics = cmd_metrics(out_pred, out_ref, options);

  // oracle: binarize both artifacts' scores per (client, dimension)
  auto preds = load_artifact(out_pred);
  auto refs = load_artifact(out_ref);
  std::map<std::pair<std::string, std::string>, const AssessmentRecord*> ref_by_key;
  for (const auto& r : refs.assessments) ref_by_key[{r.client_id, r.session_id}] = &r;
  std::vector<std::string> pred_labels, ref_labels;
  for (const auto& p : preds.assessments) {
    const auto* r = ref_by_key.at({p.client_id, p.session_id});
    for (const auto& [dim, score] : r->scores.by_dimension) {
      ref_labels.push_back(score == -1 ? "neg" : "pos");
      pred_labels.push_back(p.scores.by_dimension.at(dim) == -1 ? "neg" : "pos");
    }
  }
  auto expected = oracles::naive_metrics(pred_labels, ref_labels, std::string("pos"));
  CHECK(std::abs(metrics.aggregate.metrics.at("accuracy").mean - expected.accuracy) < 1e-9);
  CHECK(std::abs(metrics.aggregate.metrics.at("precision").mean - expected.precision) < 1e-9);
  CHECK(std::abs(metrics.aggregate.metrics.at("recall").mean - expected.recall) < 1e-9);
  CHECK(std::abs(metrics.aggregate.metrics.at("f1_binary").mean - expected.f1_binary) < 1e-9);
  CHECK(std::abs(metrics.aggregate.metrics.at("f1_macro").mean - expected.f1_macro) < 1e-9);
  CHECK(std::abs(metrics.aggregate.metrics.at("f1_weighted").mean - expected.f1_weighted) < 1e-9);
}

TEST_CASE("cmd_metrics rejects artifacts with disjoint keys") {
  auto out_a = fresh_dir("metrics-keys-a");
  auto out_b = fresh_dir("metrics-keys-b");
  cmd_assess(scripted_config("script_clean5.json", out_a), load_corpus(kFixtures / "corpus5.jsonl"));
  auto config = scripted_config("script_catchall.json", out_b);
  cmd_assess(config, load_corpus(kFixtures / "corpus_dir"));
  MetricsOptions options;
  CHECK_THROWS_WITH_AS(cmd_metrics(out_a, out_b, options),
                       doctest::Contains("missing-from"), ConfigError);
}

TEST_CASE("cmd_metrics scores outcome directions under a configurable positive class") {
  auto out_pred = fresh_dir("metrics-outcome-pred");
  auto corpus = load_pair_corpus(kFixtures / "outcome_sessions.jsonl",
                                 kFixtures / "outcome_pairs.jsonl");
  cmd_outcome(scripted_config("script_outcome.json", out_pred), corpus);

  MetricsOptions options;
  options.positive_class = "maintained_or_improved";
  auto metrics = cmd_metrics(out_pred, out_pred, options);
  CHECK(metrics.aggregate.metrics.at("accuracy").mean == 1.0);
  CHECK(metrics.aggregate.metrics.count("mse") == 0);  // no severity block for outcomes

  options.positive_class = "nonsense";
  CHECK_THROWS_AS(cmd_metrics(out_pred, out_pred, options), ConfigError);
}

TEST_CASE("cmd_stats writes the delegated statistics") {
  auto out = fresh_dir("stats");
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  auto stats = cmd_stats(corpus, Tokenizer::whitespace, out / "stats.json");
  CHECK(stats.n_sessions == 5);
  CHECK(stats.avg_utterances == 4.0);
  auto j = nlohmann::json::parse(detail::read_file(out / "stats.json"));
  CHECK(j["n_sessions"] == 5);

  Corpus empty;
  CHECK_THROWS_AS(cmd_stats(LoadedCorpus{empty, {}}, Tokenizer::whitespace), ValidationError);
}

TEST_CASE("cmd_build_pairs writes pairs and logs non-prefix failures") {
  auto out = fresh_dir("build-pairs");
  auto config = scripted_config("script_build_pairs.json", out);
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");

  auto exemplar_corpus = load_pair_corpus(kFixtures / "exemplar_sessions.jsonl",
                                          kFixtures / "exemplar_pairs.jsonl");
  std::vector<PhasePairExample> exemplars;
  for (const auto& ref : exemplar_corpus.corpus.pairs) {
    exemplars.push_back({*exemplar_corpus.corpus.find_session(ref.initial_session_id),
                         *exemplar_corpus.corpus.find_session(ref.full_session_id)});
  }

  auto artifact = cmd_build_pairs(config, corpus, exemplars);
  CHECK(artifact.manifest["counts"]["pairs"] == 5);
  CHECK(artifact.errors.empty());
  auto rebuilt = load_pair_corpus(out / "sessions.jsonl", out / "pairs.jsonl");
  CHECK(rebuilt.corpus.pairs.size() == 5);
  for (const auto& p : rebuilt.corpus.pairs) {
    const auto* initial = rebuilt.corpus.find_session(p.initial_session_id);
    const auto* full = rebuilt.corpus.find_session(p.full_session_id);
    REQUIRE(initial != nullptr);
    REQUIRE(full != nullptr);
    REQUIRE(initial->turns.size() < full->turns.size());
    for (std::size_t i = 0; i < initial->turns.size(); ++i)
      CHECK(initial->turns[i] == full->turns[i]);
  }
}

TEST_CASE("cmd_report renders counts, mean±std, and the error table") {
  auto out = fresh_dir("report-clean");
  auto corpus = load_corpus(kFixtures / "corpus4.jsonl");
  cmd_assess(scripted_config("script_clean4.json", out), corpus);
  auto report = cmd_report(out);
  CHECK(report.find("Artifact: assess") != std::string::npos);
  CHECK(report.find("±0.00") != std::string::npos);  // std 0 renders as ±0.00
  CHECK(report.find("Errors: none recorded") != std::string::npos);

  auto out_faulty = fresh_dir("report-faulty");
  cmd_assess(scripted_config("script_faulty4.json", out_faulty), corpus);
  auto faulty_report = cmd_report(out_faulty);
  CHECK(faulty_report.find("not_structured: 2") != std::string::npos);

  // two error occurrences -> two data rows in errors.csv
  auto lines = detail::split_lines(detail::read_file(out_faulty / "errors.csv"));
  std::size_t rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (!detail::trim(lines[i]).empty()) ++rows;
  }
  CHECK(rows == 2);

  CHECK_THROWS_AS(cmd_report(fs::temp_directory_path() / "ipaeval-no-such-artifact"), ConfigError);
}

TEST_CASE("load_artifact round-trips the in-memory records") {
  auto out = fresh_dir("artifact-roundtrip");
  auto corpus = load_corpus(kFixtures / "corpus5.jsonl");
  auto written = cmd_assess(scripted_config("script_clean5.json", out, 2), corpus);
  auto loaded = load_artifact(out);
  CHECK(loaded.kind() == "assess");
  REQUIRE(loaded.assessments.size() == written.assessments.size());
  for (std::size_t i = 0; i < loaded.assessments.size(); ++i)
    CHECK(loaded.assessments[i] == written.assessments[i]);

  auto out_outcome = fresh_dir("artifact-roundtrip-outcome");
  auto pair_corpus = load_pair_corpus(kFixtures / "outcome_sessions.jsonl",
                                      kFixtures / "outcome_pairs.jsonl");
  auto outcome_written = cmd_outcome(scripted_config("script_outcome.json", out_outcome, 1),
                                     pair_corpus);
  auto outcome_loaded = load_artifact(out_outcome);
  REQUIRE(outcome_loaded.outcomes.size() == 1);
  CHECK(outcome_loaded.outcomes[0] == outcome_written.outcomes[0]);

  CHECK_THROWS_AS(load_artifact(fs::temp_directory_path() / "ipaeval-nope"), ConfigError);
}

TEST_CASE("make_provider wires scripted, replay, and recording providers") {
  RunConfig config;
  config.provider = "scripted";
  CHECK_THROWS_AS(make_provider(config), ConfigError);  // script file missing
  config.script_file = (kFixtures / "script_clean5.json").string();
  CHECK(make_provider(config)->name() == "scripted");

  RunConfig replay;
  replay.provider = "cassette";
  CHECK_THROWS_AS(make_provider(replay), ConfigError);
  replay.cassette_file = (fs::temp_directory_path() / "ipaeval-nonexistent.jsonl").string();
  CHECK_THROWS_AS(make_provider(replay), ConfigError);  // replay needs an existing cassette

  // an http provider plus a cassette file records into the cassette
  setenv("IPAEVAL_BASE_URL", "http://127.0.0.1:1/v1", 1);
  setenv("IPAEVAL_API_KEY", "k", 1);
  RunConfig recording;
  recording.provider = "custom";
  recording.cassette_file = (fs::temp_directory_path() / "ipaeval-record-new.jsonl").string();
  auto provider = make_provider(recording);
  CHECK(provider->name().rfind("cassette+http:", 0) == 0);
  CHECK_NOTHROW(recording.validate());  // the cassette file may not exist yet when recording
  unsetenv("IPAEVAL_BASE_URL");
  unsetenv("IPAEVAL_API_KEY");
}

TEST_CASE("run config loads from JSON and validates") {
  nlohmann::json j{{"provider", "scripted"}, {"model", "m"}, {"runs", 2},
                   {"ablate_reasoning", true}, {"temperature", 0.5}};
  auto config = RunConfig::from_json(j);
  CHECK(config.provider == "scripted");
  CHECK(config.runs == 2);
  CHECK(config.ablate_reasoning);
  CHECK(config.temperature == 0.5);

  config.runs = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.runs = 1;
  config.script_file = "/no/such/file.json";
  CHECK_THROWS_AS(config.validate(), ConfigError);

  // snapshot never embeds the output directory
  config.script_file.clear();
  config.output_dir = "/tmp/somewhere";
  CHECK(config.snapshot().contains("output_dir") == false);
}
