#pragma once

// Batch commands and persistent run artifacts. An artifact directory is
// self-describing and fully reproducible: with a scripted provider, identical
// config and corpus produce byte-identical files. Layout:
//
//   manifest.json    command kind, config snapshot, record/error counts
//   records.jsonl    one assessment or outcome record per line
//   errors.csv       one row per error occurrence (ingestion/transport/format)
//   run_metrics.csv  per-run summary metrics
//   aggregate.json   mean and population std of the per-run metrics
//
// Nothing time- or host-dependent is written, and the output directory is
// never embedded in the snapshot.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ipaeval/dataset.hpp"
#include "ipaeval/engine.hpp"
#include "ipaeval/http_provider.hpp"
#include "ipaeval/metrics.hpp"
#include "ipaeval/outcome.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

struct RunConfig {
  std::string provider = "scripted";  // scripted | cassette | openai | mistral | fireworks | together | custom
  std::string model = "fixture";
  std::string script_file;    // scripted provider rules
  std::string cassette_file;  // cassette replay source
  std::string test_file;      // empty -> bundled SCL-90
  std::map<int, std::string> criteria_levels;  // empty -> bundled criteria
  std::string reasoning_template_file;         // empty -> built-in default
  std::string assessment_template_file;        // empty -> built-in default
  bool ablate_reasoning = false;
  int runs = 3;
  int concurrency = 1;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  int retry_budget = 3;
  std::uint64_t seed = 0;  // reserved for stochastic choices; recorded in the snapshot
  std::string positive_class = "maintained_or_improved";  // outcome-direction positive class
  std::string output_dir;

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.provider = j.value("provider", c.provider);
    c.model = j.value("model", c.model);
    c.script_file = j.value("script_file", c.script_file);
    c.cassette_file = j.value("cassette_file", c.cassette_file);
    c.test_file = j.value("test_file", c.test_file);
    if (j.contains("criteria_levels")) {
      for (auto it = j["criteria_levels"].begin(); it != j["criteria_levels"].end(); ++it)
        c.criteria_levels[std::stoi(it.key())] = it.value().get<std::string>();
    }
    c.reasoning_template_file = j.value("reasoning_template_file", c.reasoning_template_file);
    c.assessment_template_file = j.value("assessment_template_file", c.assessment_template_file);
    c.ablate_reasoning = j.value("ablate_reasoning", c.ablate_reasoning);
    c.runs = j.value("runs", c.runs);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.temperature = j.value("temperature", c.temperature);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.retry_budget = j.value("retry_budget", c.retry_budget);
    c.seed = j.value("seed", c.seed);
    c.positive_class = j.value("positive_class", c.positive_class);
    c.output_dir = j.value("output_dir", c.output_dir);
    return c;
  }

  static RunConfig from_file(const std::filesystem::path& path) {
    auto j = nlohmann::json::parse(detail::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ParseError("config file is not a JSON object: " + path.string());
    return from_json(j);
  }

  /// Snapshot embedded in every artifact. Excludes the output directory so
  /// re-running into another directory stays byte-identical.
  nlohmann::json snapshot() const {
    nlohmann::json j{{"provider", provider},
                     {"model", model},
                     {"ablate_reasoning", ablate_reasoning},
                     {"runs", runs},
                     {"concurrency", concurrency},
                     {"temperature", temperature},
                     {"max_output_tokens", max_output_tokens},
                     {"retry_budget", retry_budget},
                     {"seed", seed},
                     {"positive_class", positive_class}};
    if (!script_file.empty()) j["script_file"] = script_file;
    if (!cassette_file.empty()) j["cassette_file"] = cassette_file;
    if (!test_file.empty()) j["test_file"] = test_file;
    if (!reasoning_template_file.empty()) j["reasoning_template_file"] = reasoning_template_file;
    if (!assessment_template_file.empty()) j["assessment_template_file"] = assessment_template_file;
    if (!criteria_levels.empty()) {
      nlohmann::json levels = nlohmann::json::object();
      for (const auto& [score, text] : criteria_levels) levels[std::to_string(score)] = text;
      j["criteria_levels"] = levels;
    }
    return j;
  }

  void validate() const {
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
    for (const auto& file : {script_file, test_file, reasoning_template_file,
                             assessment_template_file}) {
      if (!file.empty() && !std::filesystem::exists(file))
        throw ConfigError("configured file does not exist: " + file);
    }
    // a cassette must already exist for replay; recording creates it
    if (provider == "cassette" && !cassette_file.empty() &&
        !std::filesystem::exists(cassette_file))
      throw ConfigError("configured file does not exist: " + cassette_file);
  }
};

/// One error occurrence inside a batch (ingestion, transport, or format).
struct BatchError {
  std::string model;
  int run_index = -1;  // -1 for run-independent (ingestion) errors
  std::string client_id;
  std::string session_id;
  std::string stage;  // ingestion | reasoning | assessment | pairing | transport
  std::string kind;
  std::string detail;
};

struct RunArtifact {
  std::string kind;  // assess | outcome | metrics | build-pairs
  nlohmann::json manifest;
  std::vector<AssessmentRecord> assessments;
  std::vector<OutcomeRecord> outcomes;
  std::vector<BatchError> errors;
  std::vector<std::map<std::string, double>> per_run_metrics;
  RunAggregate aggregate;
  std::filesystem::path dir;
};

// --- Provider and engine assembly ---

/// Construct the provider named by the config: the scripted replay provider,
/// a cassette in replay mode, or an HTTP adapter built from a vendor preset.
/// An HTTP provider combined with a cassette_file records into that cassette.
inline std::unique_ptr<Provider> make_provider(const RunConfig& config) {
  if (config.provider == "scripted") {
    if (config.script_file.empty())
      throw ConfigError("scripted provider needs a script_file");
    return std::make_unique<ScriptedProvider>(ScriptedProvider::from_file(config.script_file));
  }
  if (config.provider == "cassette") {
    if (config.cassette_file.empty())
      throw ConfigError("cassette provider needs a cassette_file");
    return std::make_unique<CassetteProvider>(config.cassette_file, CassetteMode::replay);
  }
  auto http = std::make_unique<HttpChatProvider>(provider_preset(config.provider));
  if (!config.cassette_file.empty())
    return std::make_unique<CassetteProvider>(config.cassette_file, std::move(http));
  return http;
}

inline PsychometricTest load_configured_test(const RunConfig& config) {
  if (config.test_file.empty()) return scl90();
  return load_test(detail::read_file(config.test_file));
}

inline ScoreCriteria load_configured_criteria(const RunConfig& config) {
  if (config.criteria_levels.empty()) return default_score_criteria();
  return ScoreCriteria{config.criteria_levels};
}

inline EngineConfig make_engine_config(const RunConfig& config, int run_index) {
  EngineConfig e;
  e.test = load_configured_test(config);
  e.criteria = load_configured_criteria(config);
  e.reasoning_template =
      config.reasoning_template_file.empty()
          ? default_reasoning_template(e.test)
          : load_prompt_template(detail::read_file(config.reasoning_template_file),
                                 PromptKind::items_reasoning, e.test);
  e.assessment_template =
      config.assessment_template_file.empty()
          ? default_assessment_template(e.test, e.criteria)
          : load_prompt_template(detail::read_file(config.assessment_template_file),
                                 PromptKind::symptom_assessment, e.test);
  e.ablate_reasoning = config.ablate_reasoning;
  e.run_index = run_index;
  e.model = config.model;
  e.temperature = config.temperature;
  e.max_output_tokens = config.max_output_tokens;
  e.retry = RetryPolicy{config.retry_budget, std::chrono::milliseconds(200)};
  return e;
}

namespace detail {

/// Run `tasks` with at most `concurrency` in flight; results land at their
/// task index, so output order never depends on scheduling.
template <typename Task>
void run_tasks(const std::vector<Task>& tasks, int concurrency) {
  if (concurrency <= 1 || tasks.size() <= 1) {
    for (const auto& task : tasks) task();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      tasks[i]();
    }
  };
  std::vector<std::future<void>> workers;
  auto n = std::min<std::size_t>(static_cast<std::size_t>(concurrency), tasks.size());
  for (std::size_t i = 0; i < n; ++i) workers.push_back(std::async(std::launch::async, worker));
  for (auto& w : workers) w.get();
}

inline std::string errors_csv(const std::vector<BatchError>& errors) {
  std::string out = "model,run_index,client_id,session_id,stage,kind,detail\n";
  for (const auto& e : errors) {
    out += csv_escape(e.model) + ",";
    out += (e.run_index < 0 ? std::string() : std::to_string(e.run_index)) + ",";
    out += csv_escape(e.client_id) + "," + csv_escape(e.session_id) + ",";
    out += csv_escape(e.stage) + "," + csv_escape(e.kind) + "," + csv_escape(e.detail) + "\n";
  }
  return out;
}

inline std::string run_metrics_csv(const std::vector<std::map<std::string, double>>& runs) {
  if (runs.empty()) return "run_index\n";
  std::string out = "run_index";
  for (const auto& [key, _] : runs.front()) out += "," + key;
  out += "\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out += std::to_string(r);
    for (const auto& [_, value] : runs[r]) out += "," + format_double(value);
    out += "\n";
  }
  return out;
}

inline void sort_errors(std::vector<BatchError>& errors) {
  std::sort(errors.begin(), errors.end(), [](const BatchError& a, const BatchError& b) {
    return std::tie(a.run_index, a.client_id, a.session_id, a.stage, a.kind, a.detail) <
           std::tie(b.run_index, b.client_id, b.session_id, b.stage, b.kind, b.detail);
  });
}

inline void write_artifact_files(RunArtifact& artifact, const RunConfig& config) {
  namespace fs = std::filesystem;
  if (config.output_dir.empty()) throw ConfigError("no output directory configured");
  artifact.dir = config.output_dir;
  fs::create_directories(artifact.dir);

  std::string records;
  for (const auto& r : artifact.assessments) records += nlohmann::json(r).dump() + "\n";
  for (const auto& r : artifact.outcomes) records += nlohmann::json(r).dump() + "\n";
  write_file(artifact.dir / "records.jsonl", records);
  write_file(artifact.dir / "errors.csv", errors_csv(artifact.errors));
  write_file(artifact.dir / "run_metrics.csv", run_metrics_csv(artifact.per_run_metrics));
  write_file(artifact.dir / "aggregate.json", nlohmann::json(artifact.aggregate).dump(2) + "\n");

  artifact.manifest = nlohmann::json{
      {"kind", artifact.kind},
      {"config", config.snapshot()},
      {"counts",
       {{"records", artifact.assessments.size() + artifact.outcomes.size()},
        {"errors", artifact.errors.size()}}},
      {"files", {"records.jsonl", "errors.csv", "run_metrics.csv", "aggregate.json"}}};
  // manifest last, atomically: its presence marks a complete artifact
  write_file_atomic(artifact.dir / "manifest.json", artifact.manifest.dump(2) + "\n");
}

}  // namespace detail

/// Assess every session of the corpus, `runs` times. Per-key failures are
/// recorded, never aborting the batch.
inline RunArtifact cmd_assess(const RunConfig& config, const LoadedCorpus& loaded,
                              Provider* provider_override = nullptr) {
  config.validate();
  RunArtifact artifact;
  artifact.kind = "assess";

  std::unique_ptr<Provider> owned;
  Provider* provider = provider_override;
  if (!provider) {
    owned = make_provider(config);
    provider = owned.get();
  }
  const std::string model_tag = provider->name() + "/" + config.model;

  for (const auto& e : loaded.errors)
    artifact.errors.push_back({model_tag, -1, e.source, "", "ingestion", "parse", e.detail});

  const auto& corpus = loaded.corpus;
  struct TaskResult {
    std::optional<AssessmentRecord> record;
    std::optional<BatchError> error;
  };
  struct TaskSpec {
    const Session* session;
    int run_index;
  };
  std::vector<TaskSpec> specs;
  for (int run = 0; run < config.runs; ++run) {
    for (const auto& session : corpus.sessions) specs.push_back({&session, run});
  }
  std::vector<TaskResult> results(specs.size());
  std::vector<EngineConfig> engines;
  engines.reserve(static_cast<std::size_t>(config.runs));
  for (int run = 0; run < config.runs; ++run) engines.push_back(make_engine_config(config, run));

  std::vector<std::function<void()>> tasks;
  tasks.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    tasks.push_back([&, i] {
      const auto& spec = specs[i];
      auto client_id = corpus.client_of(spec.session->id);
      try {
        auto info = assemble_client_information(ClientProfile{client_id, ""}, *spec.session, {});
        results[i].record = assess(info, engines[static_cast<std::size_t>(spec.run_index)],
                                   *provider);
      } catch (const TransportError& e) {
        results[i].error = BatchError{model_tag, spec.run_index, client_id, spec.session->id,
                                      "transport", to_string(e.kind), e.what()};
      } catch (const Error& e) {
        results[i].error = BatchError{model_tag, spec.run_index, client_id, spec.session->id,
                                      "assessment", "error", e.what()};
      }
    });
  }
  detail::run_tasks(tasks, config.concurrency);

  for (auto& r : results) {
    if (r.record) artifact.assessments.push_back(std::move(*r.record));
    if (r.error) artifact.errors.push_back(std::move(*r.error));
  }
  std::sort(artifact.assessments.begin(), artifact.assessments.end(),
            [](const AssessmentRecord& a, const AssessmentRecord& b) {
              return std::tie(a.client_id, a.session_id, a.run_index) <
                     std::tie(b.client_id, b.session_id, b.run_index);
            });

  // surface per-record format errors in the error stream as well
  for (const auto& record : artifact.assessments) {
    bool fallback = !record.errors.empty() && record.scores == fallback_scores(
        engines.front().test);
    for (std::size_t i = 0; i < record.errors.size(); ++i) {
      const auto& fe = record.errors[i];
      bool is_assessment_error = fallback && i + 1 == record.errors.size();
      artifact.errors.push_back({record.provider_model, record.run_index, record.client_id,
                                 record.session_id,
                                 is_assessment_error ? "assessment" : "reasoning",
                                 to_string(fe.kind), fe.detail});
    }
  }
  detail::sort_errors(artifact.errors);

  for (int run = 0; run < config.runs; ++run) {
    double psdi_sum = 0.0;
    double positive_sum = 0.0;
    double format_errors = 0.0;
    double fallbacks = 0.0;
    double n = 0.0;
    for (const auto& record : artifact.assessments) {
      if (record.run_index != run) continue;
      n += 1.0;
      auto v = psdi(record.scores);
      psdi_sum += v.value;
      positive_sum += static_cast<double>(v.positive_count);
      format_errors += static_cast<double>(record.errors.size());
      if (!record.errors.empty() && record.scores == fallback_scores(engines.front().test))
        fallbacks += 1.0;
    }
    artifact.per_run_metrics.push_back({{"n_records", n},
                                        {"mean_psdi", n > 0 ? psdi_sum / n : 0.0},
                                        {"mean_positive_count", n > 0 ? positive_sum / n : 0.0},
                                        {"format_errors", format_errors},
                                        {"fallback_records", fallbacks}});
  }
  artifact.aggregate = aggregate_metric_maps(artifact.per_run_metrics);
  detail::write_artifact_files(artifact, config);
  return artifact;
}

/// Evaluate the treatment outcome of every phase pair, `runs` times.
inline RunArtifact cmd_outcome(const RunConfig& config, const LoadedCorpus& loaded,
                               Provider* provider_override = nullptr) {
  config.validate();
  RunArtifact artifact;
  artifact.kind = "outcome";

  std::unique_ptr<Provider> owned;
  Provider* provider = provider_override;
  if (!provider) {
    owned = make_provider(config);
    provider = owned.get();
  }
  const std::string model_tag = provider->name() + "/" + config.model;

  for (const auto& e : loaded.errors)
    artifact.errors.push_back({model_tag, -1, e.source, "", "ingestion", "parse", e.detail});

  const auto& corpus = loaded.corpus;
  if (corpus.pairs.empty()) throw ConfigError("outcome evaluation needs a pair corpus");

  struct TaskResult {
    std::optional<OutcomeRecord> record;
    std::optional<BatchError> error;
  };
  struct TaskSpec {
    const PairRef* pair;
    int run_index;
  };
  std::vector<TaskSpec> specs;
  for (int run = 0; run < config.runs; ++run) {
    for (const auto& pair : corpus.pairs) specs.push_back({&pair, run});
  }
  std::vector<TaskResult> results(specs.size());
  std::vector<EngineConfig> engines;
  for (int run = 0; run < config.runs; ++run) engines.push_back(make_engine_config(config, run));

  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    tasks.push_back([&, i] {
      const auto& spec = specs[i];
      const auto& pair = *spec.pair;
      try {
        const auto* initial_session = corpus.find_session(pair.initial_session_id);
        const auto* full_session = corpus.find_session(pair.full_session_id);
        if (!initial_session || !full_session)
          throw ConfigError("pair references a missing session");
        auto initial_client = corpus.client_of(pair.initial_session_id);
        auto final_client = corpus.client_of(pair.full_session_id);
        // fall back to the pair's client id when the sessions carry none
        if (initial_client == pair.initial_session_id) initial_client = pair.client_id;
        if (final_client == pair.full_session_id) final_client = pair.client_id;
        auto initial = assemble_client_information(ClientProfile{initial_client, ""},
                                                   *initial_session, {});
        auto final_info = assemble_client_information(ClientProfile{final_client, ""},
                                                      *full_session, {});
        results[i].record = evaluate_outcome(initial, final_info,
                                             engines[static_cast<std::size_t>(spec.run_index)],
                                             *provider);
      } catch (const TransportError& e) {
        results[i].error = BatchError{model_tag, spec.run_index, pair.client_id, "", "transport",
                                      to_string(e.kind), e.what()};
      } catch (const Error& e) {
        results[i].error = BatchError{model_tag, spec.run_index, pair.client_id, "", "pairing",
                                      "error", e.what()};
      }
    });
  }
  detail::run_tasks(tasks, config.concurrency);

  for (auto& r : results) {
    if (r.record) artifact.outcomes.push_back(std::move(*r.record));
    if (r.error) artifact.errors.push_back(std::move(*r.error));
  }
  std::sort(artifact.outcomes.begin(), artifact.outcomes.end(),
            [](const OutcomeRecord& a, const OutcomeRecord& b) {
              return std::tie(a.client_id, a.initial.run_index) <
                     std::tie(b.client_id, b.initial.run_index);
            });

  for (const auto& record : artifact.outcomes) {
    for (const auto* phase : {&record.initial, &record.final}) {
      for (const auto& fe : phase->errors) {
        artifact.errors.push_back({record.initial.provider_model, phase->run_index,
                                   record.client_id, phase->session_id, "assessment",
                                   to_string(fe.kind), fe.detail});
      }
    }
  }
  detail::sort_errors(artifact.errors);

  for (int run = 0; run < config.runs; ++run) {
    double delta_sum = 0.0;
    double worsened = 0.0;
    double format_errors = 0.0;
    double n = 0.0;
    for (const auto& record : artifact.outcomes) {
      if (record.initial.run_index != run) continue;
      n += 1.0;
      delta_sum += record.delta;
      if (record.direction == Direction::worsened) worsened += 1.0;
      format_errors +=
          static_cast<double>(record.initial.errors.size() + record.final.errors.size());
    }
    artifact.per_run_metrics.push_back({{"n_records", n},
                                        {"mean_delta", n > 0 ? delta_sum / n : 0.0},
                                        {"worsened_fraction", n > 0 ? worsened / n : 0.0},
                                        {"format_errors", format_errors}});
  }
  artifact.aggregate = aggregate_metric_maps(artifact.per_run_metrics);
  detail::write_artifact_files(artifact, config);
  return artifact;
}

// --- Artifact loading and metric evaluation ---

struct LoadedArtifact {
  nlohmann::json manifest;
  std::vector<AssessmentRecord> assessments;
  std::vector<OutcomeRecord> outcomes;

  std::string kind() const { return manifest.value("kind", std::string()); }
};

inline LoadedArtifact load_artifact(const std::filesystem::path& dir) {
  auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError("missing artifact: no manifest at " + manifest_path.string());
  LoadedArtifact artifact;
  artifact.manifest = nlohmann::json::parse(detail::read_file(manifest_path));
  auto kind = artifact.kind();
  auto records = detail::read_file(dir / "records.jsonl");
  for (auto line : detail::split_lines(records)) {
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto j = nlohmann::json::parse(t);
    if (kind == "assess") artifact.assessments.push_back(j.get<AssessmentRecord>());
    else if (kind == "outcome") artifact.outcomes.push_back(j.get<OutcomeRecord>());
  }
  return artifact;
}

struct MetricsOptions {
  std::string positive_class = "maintained_or_improved";
  int reference_run = 0;
  std::string output_dir;
};

namespace detail {

template <typename Key>
void require_same_keys(const std::set<Key>& predictions, const std::set<Key>& references,
                       const std::string& what) {
  if (predictions == references) return;
  std::string detail_msg;
  for (const auto& k : references) {
    if (!predictions.count(k)) detail_msg += " missing-from-predictions:" + k;
  }
  for (const auto& k : predictions) {
    if (!references.count(k)) detail_msg += " missing-from-references:" + k;
  }
  throw ConfigError("artifacts cover different " + what + " keys:" + detail_msg);
}

inline std::string metrics_csv_row(const std::string& model, const RunAggregate& aggregate) {
  static const std::vector<std::string> order{"accuracy", "precision", "recall", "f1_binary",
                                              "f1_macro", "f1_weighted", "mse", "mae"};
  std::string header = "model,runs";
  std::string row = csv_escape(model) + "," + std::to_string(aggregate.runs);
  for (const auto& key : order) {
    auto it = aggregate.metrics.find(key);
    if (it == aggregate.metrics.end()) continue;
    header += "," + key + "_mean," + key + "_std";
    row += "," + format_double(it->second.mean) + "," + format_double(it->second.std);
  }
  return header + "\n" + row + "\n";
}

}  // namespace detail

/// Score a predictions artifact against a references artifact of the same
/// kind. Assessment artifacts yield binarized detection metrics plus PSDI
/// severity errors; outcome artifacts yield direction metrics under the
/// configured positive class. Each prediction run is compared against the
/// chosen reference run.
inline RunArtifact cmd_metrics(const std::filesystem::path& predictions_dir,
                               const std::filesystem::path& references_dir,
                               const MetricsOptions& options) {
  auto predictions = load_artifact(predictions_dir);
  auto references = load_artifact(references_dir);
  if (predictions.kind() != references.kind())
    throw ConfigError("artifact kinds differ: " + predictions.kind() + " vs " + references.kind());

  RunArtifact artifact;
  artifact.kind = "metrics";
  std::vector<MetricReport> reports;
  std::string predictions_model = "unknown";

  if (predictions.kind() == "assess") {
    std::map<int, std::map<std::pair<std::string, std::string>, const AssessmentRecord*>> by_run;
    for (const auto& r : predictions.assessments) {
      by_run[r.run_index][{r.client_id, r.session_id}] = &r;
      predictions_model = r.provider_model;
    }
    std::map<std::pair<std::string, std::string>, const AssessmentRecord*> refs;
    for (const auto& r : references.assessments) {
      if (r.run_index == options.reference_run) refs[{r.client_id, r.session_id}] = &r;
    }
    if (refs.empty()) throw ConfigError("references artifact has no records for the reference run");

    for (const auto& [run, records] : by_run) {
      std::set<std::string> pred_keys, ref_keys;
      for (const auto& [key, _] : records) pred_keys.insert(key.first + "/" + key.second);
      for (const auto& [key, _] : refs) ref_keys.insert(key.first + "/" + key.second);
      detail::require_same_keys(pred_keys, ref_keys, "client/session");

      std::vector<DetectionLabel> pred_labels, ref_labels;
      std::vector<double> pred_psdi, ref_psdi;
      for (const auto& [key, pred] : records) {
        const auto* ref = refs.at(key);
        for (const auto& [dim, ref_score] : ref->scores.by_dimension) {
          auto it = pred->scores.by_dimension.find(dim);
          if (it == pred->scores.by_dimension.end())
            throw ConfigError("prediction record lacks dimension: " + dim);
          pred_labels.push_back(binarize_detection(it->second));
          ref_labels.push_back(binarize_detection(ref_score));
        }
        pred_psdi.push_back(psdi(pred->scores).value);
        ref_psdi.push_back(psdi(ref->scores).value);
      }
      auto report = classification_metrics(pred_labels, ref_labels, DetectionLabel::positive);
      auto severity = severity_errors(pred_psdi, ref_psdi);
      report.mse = severity.mse;
      report.mae = severity.mae;
      reports.push_back(std::move(report));
    }
  } else if (predictions.kind() == "outcome") {
    auto positive = direction_from_string(options.positive_class);
    if (!positive) throw ConfigError("unknown positive class: " + options.positive_class);

    std::map<int, std::map<std::string, const OutcomeRecord*>> by_run;
    for (const auto& r : predictions.outcomes) {
      by_run[r.initial.run_index][r.client_id] = &r;
      predictions_model = r.initial.provider_model;
    }
    std::map<std::string, const OutcomeRecord*> refs;
    for (const auto& r : references.outcomes) {
      if (r.initial.run_index == options.reference_run) refs[r.client_id] = &r;
    }
    if (refs.empty()) throw ConfigError("references artifact has no records for the reference run");

    for (const auto& [run, records] : by_run) {
      std::set<std::string> pred_keys, ref_keys;
      for (const auto& [key, _] : records) pred_keys.insert(key);
      for (const auto& [key, _] : refs) ref_keys.insert(key);
      detail::require_same_keys(pred_keys, ref_keys, "client");

      std::vector<Direction> pred_labels, ref_labels;
      for (const auto& [key, pred] : records) {
        pred_labels.push_back(pred->direction);
        ref_labels.push_back(refs.at(key)->direction);
      }
      reports.push_back(classification_metrics(pred_labels, ref_labels, *positive));
    }
  } else {
    throw ConfigError("cannot compute metrics over artifact kind: " + predictions.kind());
  }

  for (const auto& r : reports) artifact.per_run_metrics.push_back(r.metric_map());
  artifact.aggregate = aggregate_metric_maps(artifact.per_run_metrics);

  if (!options.output_dir.empty()) {
    artifact.dir = options.output_dir;
    std::filesystem::create_directories(artifact.dir);
    nlohmann::json mj;
    mj["per_run"] = reports;
    mj["aggregate"] = artifact.aggregate;
    mj["positive_class"] = options.positive_class;
    mj["reference_run"] = options.reference_run;
    detail::write_file(artifact.dir / "metrics.json", mj.dump(2) + "\n");
    detail::write_file(artifact.dir / "metrics.csv",
                       detail::metrics_csv_row(predictions_model, artifact.aggregate));
    artifact.manifest =
        nlohmann::json{{"kind", "metrics"},
                       {"config",
                        {{"positive_class", options.positive_class},
                         {"reference_run", options.reference_run},
                         {"predictions_model", predictions_model}}},
                       {"counts", {{"runs", reports.size()}}},
                       {"files", {"metrics.json", "metrics.csv"}}};
    detail::write_file_atomic(artifact.dir / "manifest.json", artifact.manifest.dump(2) + "\n");
  }
  return artifact;
}

/// Corpus statistics, optionally written to a JSON file.
inline DatasetStats cmd_stats(const LoadedCorpus& loaded, Tokenizer tokenizer,
                              const std::filesystem::path& out_file = {}) {
  auto stats = corpus_stats(loaded.corpus, tokenizer);
  if (!out_file.empty())
    detail::write_file(out_file, nlohmann::json(stats).dump(2) + "\n");
  return stats;
}

/// Build phase pairs for every session of the corpus. Writes sessions.jsonl
/// (originals plus derived initial sessions) and pairs.jsonl; per-session
/// failures are logged and skipped.
inline RunArtifact cmd_build_pairs(const RunConfig& config, const LoadedCorpus& loaded,
                                   const std::vector<PhasePairExample>& exemplars,
                                   Provider* provider_override = nullptr) {
  config.validate();
  RunArtifact artifact;
  artifact.kind = "build-pairs";

  std::unique_ptr<Provider> owned;
  Provider* provider = provider_override;
  if (!provider) {
    owned = make_provider(config);
    provider = owned.get();
  }
  const std::string model_tag = provider->name() + "/" + config.model;

  for (const auto& e : loaded.errors)
    artifact.errors.push_back({model_tag, -1, e.source, "", "ingestion", "parse", e.detail});

  PhasePairConfig pair_config;
  pair_config.model = config.model;
  pair_config.temperature = config.temperature;
  pair_config.retry = RetryPolicy{config.retry_budget, std::chrono::milliseconds(200)};

  std::vector<Session> sessions_out;
  std::vector<PairRef> pairs_out;
  for (const auto& session : loaded.corpus.sessions) {
    auto client_id = loaded.corpus.client_of(session.id);
    try {
      auto pair = build_phase_pair(session, exemplars, *provider, pair_config);
      sessions_out.push_back(pair.initial);
      sessions_out.push_back(pair.full);
      pairs_out.push_back({client_id, pair.initial.id, pair.full.id});
    } catch (const FormatDecodeError& e) {
      artifact.errors.push_back({model_tag, 0, client_id, session.id, "pairing",
                                 to_string(e.error.kind), e.error.detail});
    } catch (const NonPrefixError& e) {
      artifact.errors.push_back(
          {model_tag, 0, client_id, session.id, "pairing", "non_prefix", e.what()});
    } catch (const TransportError& e) {
      artifact.errors.push_back(
          {model_tag, 0, client_id, session.id, "transport", to_string(e.kind), e.what()});
    }
  }
  detail::sort_errors(artifact.errors);

  if (config.output_dir.empty()) throw ConfigError("no output directory configured");
  artifact.dir = config.output_dir;
  std::filesystem::create_directories(artifact.dir);
  std::string sessions_text;
  for (const auto& s : sessions_out) sessions_text += nlohmann::json(s).dump() + "\n";
  std::string pairs_text;
  for (const auto& p : pairs_out) pairs_text += nlohmann::json(p).dump() + "\n";
  detail::write_file(artifact.dir / "sessions.jsonl", sessions_text);
  detail::write_file(artifact.dir / "pairs.jsonl", pairs_text);
  detail::write_file(artifact.dir / "errors.csv", detail::errors_csv(artifact.errors));
  artifact.manifest = nlohmann::json{
      {"kind", "build-pairs"},
      {"config", config.snapshot()},
      {"counts", {{"pairs", pairs_out.size()}, {"errors", artifact.errors.size()}}},
      {"files", {"sessions.jsonl", "pairs.jsonl", "errors.csv"}}};
  detail::write_file_atomic(artifact.dir / "manifest.json", artifact.manifest.dump(2) + "\n");
  return artifact;
}

/// Human-readable summary of an artifact directory: config, per-metric
/// mean±std, and the format-error distribution per model and kind.
inline std::string cmd_report(const std::filesystem::path& artifact_dir) {
  auto manifest_path = artifact_dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError("missing artifact: no manifest at " + manifest_path.string());
  auto manifest = nlohmann::json::parse(detail::read_file(manifest_path));
  auto kind = manifest.value("kind", std::string("unknown"));

  std::string out;
  out += "Artifact: " + kind + "\n";
  if (manifest.contains("config")) {
    const auto& cfg = manifest["config"];
    out += "Config:";
    if (cfg.contains("provider")) out += " provider=" + cfg["provider"].get<std::string>();
    if (cfg.contains("model")) out += " model=" + cfg["model"].get<std::string>();
    if (cfg.contains("runs")) out += " runs=" + std::to_string(cfg["runs"].get<int>());
    if (cfg.contains("ablate_reasoning"))
      out += std::string(" ablate_reasoning=") + (cfg["ablate_reasoning"].get<bool>() ? "on" : "off");
    if (cfg.contains("positive_class"))
      out += " positive_class=" + cfg["positive_class"].get<std::string>();
    out += "\n";
  }
  if (manifest.contains("counts")) out += "Counts: " + manifest["counts"].dump() + "\n";

  auto render_aggregate = [&](const nlohmann::json& aggregate) {
    out += "Metrics (mean±std over " + std::to_string(aggregate["runs"].get<int>()) + " runs):\n";
    for (auto it = aggregate["metrics"].begin(); it != aggregate["metrics"].end(); ++it) {
      out += "  " + it.key() + ": " + detail::format_fixed(it.value()["mean"].get<double>(), 4) +
             "±" + detail::format_fixed(it.value()["std"].get<double>(), 2) + "\n";
    }
  };
  auto aggregate_path = artifact_dir / "aggregate.json";
  if (std::filesystem::exists(aggregate_path))
    render_aggregate(nlohmann::json::parse(detail::read_file(aggregate_path)));
  auto metrics_path = artifact_dir / "metrics.json";
  if (std::filesystem::exists(metrics_path)) {
    auto mj = nlohmann::json::parse(detail::read_file(metrics_path));
    render_aggregate(mj["aggregate"]);
  }

  auto errors_path = artifact_dir / "errors.csv";
  if (std::filesystem::exists(errors_path)) {
    auto lines = detail::split_lines(detail::read_file(errors_path));
    // columns: model,run_index,client_id,session_id,stage,kind,detail
    std::map<std::string, std::size_t> distribution;
    std::size_t rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto line = detail::trim(lines[i]);
      if (line.empty()) continue;
      ++rows;
      std::vector<std::string> fields;
      std::string field;
      bool quoted = false;
      for (char c : line) {
        if (quoted) {
          if (c == '"') quoted = false;
          else field += c;
        } else if (c == '"') {
          quoted = true;
        } else if (c == ',') {
          fields.push_back(field);
          field.clear();
        } else {
          field += c;
        }
      }
      fields.push_back(field);
      if (fields.size() >= 6) ++distribution[fields[0] + " | " + fields[4] + " | " + fields[5]];
    }
    if (rows == 0) {
      out += "Errors: none recorded\n";
    } else {
      out += "Errors: " + std::to_string(rows) + " (distribution by model | stage | kind):\n";
      for (const auto& [key, count] : distribution)
        out += "  " + key + ": " + std::to_string(count) + "\n";
    }
  }
  return out;
}

}  // namespace ipaeval
