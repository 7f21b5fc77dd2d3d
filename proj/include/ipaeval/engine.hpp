#pragma once

// Two-stage assessment orchestration: items-aware reasoning, then symptom
// assessment conditioned on the re-serialized stage-1 output. Stage failures
// degrade the pipeline instead of aborting it: a stage-1 decode failure
// yields a reasoning-free assessment, a stage-2 decode failure yields the
// all-(-1) fallback scores. Only transport errors propagate.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ipaeval/client_info.hpp"
#include "ipaeval/decode.hpp"
#include "ipaeval/gateway.hpp"
#include "ipaeval/prompts.hpp"
#include "ipaeval/records.hpp"

namespace ipaeval {

struct EngineConfig {
  PsychometricTest test;
  ScoreCriteria criteria;
  PromptTemplate reasoning_template;
  PromptTemplate assessment_template;
  bool ablate_reasoning = false;
  int run_index = 0;
  std::string model;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  RetryPolicy retry{};

  /// Bundled SCL-90, bundled criteria, and the default prompt templates.
  static EngineConfig defaults() {
    EngineConfig c;
    c.test = scl90();
    c.criteria = default_score_criteria();
    c.reasoning_template = default_reasoning_template(c.test);
    c.assessment_template = default_assessment_template(c.test, c.criteria);
    c.model = "default";
    return c;
  }
};

namespace detail {

inline CompletionRequest make_request(const EngineConfig& config, std::vector<Message> messages) {
  CompletionRequest request;
  request.messages = std::move(messages);
  request.model = config.model;
  request.temperature = config.temperature;
  request.max_output_tokens = config.max_output_tokens;
  return request;
}

}  // namespace detail

struct ReasoningStageResult {
  std::vector<ReasoningItem> items;
  std::vector<FormatError> errors;
};

struct AssessmentStageResult {
  AssessmentScores scores;
  std::vector<FormatError> errors;
};

/// Stage 1: generate and decode items-aware reasoning. A decode failure
/// returns an empty item list plus the error; it never aborts the pipeline.
inline ReasoningStageResult run_items_reasoning(const ClientInformation& info,
                                                const PromptTemplate& tmpl, Provider& provider,
                                                const EngineConfig& config) {
  if (tmpl.kind != PromptKind::items_reasoning)
    throw ValidationError("run_items_reasoning needs an items-reasoning template");
  auto messages = render_messages(tmpl, render_context(info));
  auto response = complete_with_retry(provider, detail::make_request(config, std::move(messages)),
                                      config.retry);
  auto decoded = decode_reasoning(response.raw_text, config.test);
  if (std::holds_alternative<FormatError>(decoded))
    return {{}, {std::get<FormatError>(decoded)}};
  return {std::get<std::vector<ReasoningItem>>(std::move(decoded)), {}};
}

/// Stage 2: generate and decode assessment scores, conditioned on the
/// canonical re-serialization of `reasoning` (omitted entirely when empty).
/// A decode failure returns the all-(-1) fallback plus the error.
inline AssessmentStageResult run_assessment(const ClientInformation& info,
                                            const std::vector<ReasoningItem>& reasoning,
                                            const PromptTemplate& tmpl, Provider& provider,
                                            const EngineConfig& config) {
  if (tmpl.kind != PromptKind::symptom_assessment)
    throw ValidationError("run_assessment needs a symptom-assessment template");
  std::optional<std::string> reasoning_text;
  if (!reasoning.empty()) reasoning_text = encode_reasoning(reasoning);
  auto messages = render_messages(tmpl, render_context(info), reasoning_text);
  auto response = complete_with_retry(provider, detail::make_request(config, std::move(messages)),
                                      config.retry);
  auto decoded = decode_assessment(response.raw_text, config.test, config.criteria);
  if (std::holds_alternative<FormatError>(decoded))
    return {fallback_scores(config.test), {std::get<FormatError>(decoded)}};
  return {std::get<AssessmentScores>(std::move(decoded)), {}};
}

/// Full two-stage assessment of one client information value. Stage 1 runs
/// unless ablated; stage 2 always runs. The returned record always carries a
/// complete score map, real or fallback.
inline AssessmentRecord assess(const ClientInformation& info, const EngineConfig& config,
                               Provider& provider) {
  AssessmentRecord record;
  record.client_id = info.profile.id;
  record.session_id = info.session.id;
  record.run_index = config.run_index;
  record.provider_model = provider.name() + "/" + config.model;

  if (!config.ablate_reasoning) {
    auto stage1 = run_items_reasoning(info, config.reasoning_template, provider, config);
    record.reasoning = std::move(stage1.items);
    record.errors = std::move(stage1.errors);
  }

  auto stage2 = run_assessment(info, record.reasoning, config.assessment_template, provider, config);
  record.scores = std::move(stage2.scores);
  for (auto& e : stage2.errors) record.errors.push_back(std::move(e));
  return record;
}

}  // namespace ipaeval
