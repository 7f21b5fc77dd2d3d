#pragma once

// Prompt construction for both pipeline stages. Templates carry named slots
// which are the stable interface for user-supplied template files:
//
//   <Psychometric Test>             test rendering
//   <Format Instructions>           structured-output instructions
//   <Interview>                     rendered client information
//   <Item-aware Reasoning Result>   stage-1 output (assessment stage only)
//
// Rendering yields one system message (role, criteria, directives, test,
// format) and one user message (the client material). When no reasoning text
// is supplied the reasoning slot line is omitted entirely, so an ablated
// prompt is a strict sub-content of the full one.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ipaeval/errors.hpp"
#include "ipaeval/psychometric.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

enum class MessageRole { system, user, assistant };

inline const char* to_string(MessageRole r) {
  switch (r) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "unknown";
}

struct Message {
  MessageRole role = MessageRole::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

enum class PromptKind { items_reasoning, symptom_assessment };

inline const char* to_string(PromptKind k) {
  return k == PromptKind::items_reasoning ? "items_reasoning" : "symptom_assessment";
}

inline constexpr std::string_view kTestSlot = "<Psychometric Test>";
inline constexpr std::string_view kFormatSlot = "<Format Instructions>";
inline constexpr std::string_view kInterviewSlot = "<Interview>";
inline constexpr std::string_view kReasoningSlot = "<Item-aware Reasoning Result>";

/// The building blocks of a prompt: role text, directives, output formatting,
/// and (assessment stage only) a rendered score-criteria block.
struct PromptComponents {
  std::string role_text;
  std::string directives;
  std::string output_format;
  std::optional<std::string> score_criteria;

  static PromptComponents reasoning_defaults();
  static PromptComponents assessment_defaults();

  bool operator==(const PromptComponents&) const = default;
};

struct PromptTemplate {
  PromptKind kind = PromptKind::items_reasoning;
  PromptComponents components;
  PsychometricTest test;
  std::string system_body;  // slot-bearing text before the client material
  std::string user_body;    // slot-bearing text carrying the client material

  bool operator==(const PromptTemplate&) const = default;
};

// --- Default texts ---

namespace prompt_text {

inline constexpr std::string_view kReasoningRole =
    "Imagine you are a skilled psychologist adept at identifying potential symptoms from "
    "interview. You can explain how these symptoms relate to the SCL-90 symptom checklist and "
    "specific items within it.";

inline constexpr std::string_view kReasoningDirectives =
    "Your task is to determine the presence or absence of symptoms from the Client's statements "
    "and provide detailed reasons for your assessment. Extract specific parts related to SCL-90 "
    "symptoms from the Client's statements. For each extracted part, indicate whether the "
    "symptom is present or not, and explain why this text is related to the SCL-90 symptom and "
    "specific item. If a symptom is mentioned but not present, extract that part and explain why "
    "the symptom is not present.SCL-90 is a psychological symptom assessment tool with 90 items, "
    "each evaluating different aspects of psychological distress.";

inline constexpr std::string_view kReasoningGuidance =
    "Presence of Symptoms: Extract the relevant part of the Client's statement. Indicate that "
    "the symptom is present. Explain why this text indicates the presence of the SCL-90 symptom "
    "and specify the item. Absence of Symptoms: Extract the part where the symptom is mentioned "
    "but not present. Indicate that the symptom is not present. Explain why this text does not "
    "indicate the presence of the SCL-90 symptom despite the mention.";

inline constexpr std::string_view kAssessmentRole =
    "As a psychologist specializing in this evaluation task, based on the following interview "
    "and the extracted Symptom Checklist-90 (SCL-90) symptom-related content and explanation, "
    "provide a qualitative score (-1-2) for each symptom category.";

inline constexpr std::string_view kAssessmentCriteria =
    "Scoring criteria: -1 (Symptom not addressed in the interview), 0 (Symptom addressed in the "
    "interview, but no symptoms found, no signs of distress or dysfunction), 1 (Minimal "
    "symptoms, minor indications of distress but no significant dysfunction), 2 (Clear symptoms, "
    "clear indications of distress and significant dysfunction).";

inline constexpr std::string_view kAssessmentDirectives =
    "Please note that this qualitative assessment is based on the state at the end of the "
    "interview. There may be noticeable symptoms during the interview, but these symptoms may "
    "become clarified or alleviated as the discussion progresses.";

inline constexpr std::string_view kClosingInstruction =
    "Please extract specific parts related to SCL-90 symptoms from the Client's statements. For "
    "each extracted part, indicate whether the symptom is present or not, and explain why this "
    "text is related to the SCL-90 symptom and specific item. If a symptom is mentioned but not "
    "present, extract that part and explain why the symptom is not present.";

}  // namespace prompt_text

/// Default `<Format Instructions>` text for the reasoning stage. The same
/// schema is published as data/schemas/reasoning_items.schema.json.
inline std::string default_reasoning_format_instructions() {
  return "Return only a JSON object, with no surrounding prose or markdown fences, of the form:\n"
         "{\"items\": [{\"client_statement\": \"<verbatim excerpt from the Client's statements>\", "
         "\"symptom_category\": \"<a dimension name of the psychometric test>\", "
         "\"specific_symptom\": \"<the specific checklist item>\", "
         "\"presence\": true or false, "
         "\"explanation\": \"<why the excerpt does or does not indicate the symptom>\"}]}\n"
         "Use an empty \"items\" array when no statement relates to any symptom.";
}

/// Default `<Format Instructions>` text for the assessment stage. The same
/// schema is published as data/schemas/assessment_scores.schema.json.
inline std::string default_assessment_format_instructions() {
  return "Return only a JSON object, with no surrounding prose or markdown fences, of the form:\n"
         "{\"scores\": {\"<dimension name>\": <integer score>, ...}}\n"
         "Score every dimension of the psychometric test exactly once, using only the integer "
         "levels given in the scoring criteria.";
}

inline PromptComponents PromptComponents::reasoning_defaults() {
  PromptComponents c;
  c.role_text = std::string(prompt_text::kReasoningRole);
  c.directives = std::string(prompt_text::kReasoningDirectives);
  c.output_format = default_reasoning_format_instructions();
  return c;
}

inline PromptComponents PromptComponents::assessment_defaults() {
  PromptComponents c;
  c.role_text = std::string(prompt_text::kAssessmentRole);
  c.directives = std::string(prompt_text::kAssessmentDirectives);
  c.output_format = default_assessment_format_instructions();
  c.score_criteria = std::string(prompt_text::kAssessmentCriteria);
  return c;
}

namespace detail {

inline void require_component(std::string_view value, std::string_view name) {
  if (trim(value).empty())
    throw ValidationError("prompt component is missing or empty: " + std::string(name));
}

}  // namespace detail

/// Build the items-aware reasoning prompt from components and a test.
/// Default components reproduce the published stage-1 prompt.
inline PromptTemplate build_reasoning_prompt(const PromptComponents& components,
                                             const PsychometricTest& test) {
  detail::require_component(components.role_text, "role_text");
  detail::require_component(components.directives, "directives");
  detail::require_component(components.output_format, "output_format");
  if (components.score_criteria)
    throw ValidationError("items-reasoning prompts do not take score criteria");

  PromptTemplate t;
  t.kind = PromptKind::items_reasoning;
  t.components = components;
  t.test = test;
  t.system_body = "Role:\n" + components.role_text +
                  "\n\nDirectives:\n" + components.directives +
                  "\n\nAdditional Information:\nSymptom Checklist-90:\n" +
                  std::string(kTestSlot) + "\n" + std::string(prompt_text::kReasoningGuidance) +
                  "\n\nOutput Formatting:\n" + std::string(kFormatSlot) +
                  "\n\nClient Information:";
  t.user_body = std::string(kInterviewSlot) + "\n\n" + std::string(prompt_text::kClosingInstruction);
  return t;
}

/// Build the symptom-assessment prompt. The criteria block comes from
/// components.score_criteria when present, else it is rendered from
/// `criteria`; default components reproduce the published stage-2 prompt.
inline PromptTemplate build_assessment_prompt(const PromptComponents& components,
                                              const PsychometricTest& test,
                                              const ScoreCriteria& criteria) {
  detail::require_component(components.role_text, "role_text");
  detail::require_component(components.directives, "directives");
  detail::require_component(components.output_format, "output_format");

  std::string criteria_block;
  if (components.score_criteria && !detail::trim(*components.score_criteria).empty()) {
    criteria_block = *components.score_criteria;
  } else if (!criteria.levels.empty()) {
    criteria_block = render_score_criteria(criteria);
  } else {
    throw ValidationError("prompt component is missing or empty: score_criteria");
  }

  PromptTemplate t;
  t.kind = PromptKind::symptom_assessment;
  t.components = components;
  t.components.score_criteria = criteria_block;
  t.test = test;
  t.system_body = "Role:\n" + components.role_text +
                  "\n\nScore Criteria:\n" + criteria_block +
                  "\n\nDirectives:\n" + components.directives +
                  "\n\nAdditional Information:\n" + std::string(kTestSlot) +
                  "\n\nOutput Formatting:\n" + std::string(kFormatSlot) +
                  "\n\nClient Information:";
  t.user_body = std::string(kInterviewSlot) + "\n" + std::string(kReasoningSlot) + "\n\n" +
                std::string(prompt_text::kClosingInstruction);
  return t;
}

inline PromptTemplate default_reasoning_template(const PsychometricTest& test) {
  return build_reasoning_prompt(PromptComponents::reasoning_defaults(), test);
}

inline PromptTemplate default_assessment_template(const PsychometricTest& test,
                                                  const ScoreCriteria& criteria) {
  return build_assessment_prompt(PromptComponents::assessment_defaults(), test, criteria);
}

/// Load a template from a plain-text file body. The user message starts at
/// the first line containing the `<Interview>` slot; everything before it
/// becomes the system message. Role and directives live inside the file, so
/// only the output-format text can be overridden here.
inline PromptTemplate load_prompt_template(std::string_view file_body, PromptKind kind,
                                           const PsychometricTest& test,
                                           std::string_view output_format = {}) {
  auto interview_pos = file_body.find(kInterviewSlot);
  if (interview_pos == std::string_view::npos)
    throw ValidationError("template has no <Interview> slot");
  auto line_start = file_body.rfind('\n', interview_pos);
  line_start = line_start == std::string_view::npos ? 0 : line_start + 1;

  PromptTemplate t;
  t.kind = kind;
  t.test = test;
  t.components.role_text = "(embedded in template body)";
  t.components.directives = "(embedded in template body)";
  t.components.output_format =
      output_format.empty()
          ? (kind == PromptKind::items_reasoning ? default_reasoning_format_instructions()
                                                 : default_assessment_format_instructions())
          : std::string(output_format);
  if (kind == PromptKind::symptom_assessment)
    t.components.score_criteria = "(embedded in template body)";
  auto system_part = file_body.substr(0, line_start);
  while (!system_part.empty() && (system_part.back() == '\n' || system_part.back() == '\r'))
    system_part.remove_suffix(1);
  t.system_body = std::string(system_part);
  t.user_body = std::string(detail::trim(file_body.substr(line_start)));
  if (t.system_body.find(kReasoningSlot) != std::string::npos)
    throw ValidationError(
        "the <Item-aware Reasoning Result> slot belongs to the client material, after <Interview>");
  if (t.kind == PromptKind::symptom_assessment &&
      t.user_body.find(kReasoningSlot) == std::string::npos)
    throw ValidationError("assessment template has no <Item-aware Reasoning Result> slot");
  return t;
}

namespace detail {

// Remove the whole line holding `slot` (with its newline), so omitted slots
// leave no blank residue.
inline std::string drop_slot_line(std::string_view text, std::string_view slot) {
  auto pos = text.find(slot);
  if (pos == std::string_view::npos) return std::string(text);
  auto line_start = text.rfind('\n', pos);
  line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
  auto line_end = text.find('\n', pos);
  line_end = line_end == std::string_view::npos ? text.size() : line_end + 1;
  std::string out(text.substr(0, line_start));
  out += text.substr(line_end);
  return out;
}

inline void check_no_unresolved_slots(std::string_view text) {
  for (auto slot : {kTestSlot, kFormatSlot, kInterviewSlot, kReasoningSlot}) {
    if (text.find(slot) != std::string_view::npos)
      throw ValidationError("unresolved template slot: " + std::string(slot));
  }
}

}  // namespace detail

/// Render a template into the message sequence sent to a provider. `context`
/// fills the `<Interview>` slot; `reasoning`, when present, fills the
/// reasoning slot of an assessment template. Supplying reasoning to a
/// reasoning-stage template is a slot mismatch.
inline std::vector<Message> render_messages(const PromptTemplate& tmpl, std::string_view context,
                                            const std::optional<std::string>& reasoning = {}) {
  if (tmpl.kind == PromptKind::items_reasoning && reasoning.has_value())
    throw ValidationError("reasoning text supplied to an items-reasoning template");

  auto substitute_shared = [&](std::string text) {
    text = detail::replace_all(text, kTestSlot, render_test(tmpl.test));
    text = detail::replace_all(text, kFormatSlot, tmpl.components.output_format);
    return text;
  };

  std::string system_text = substitute_shared(tmpl.system_body);
  std::string user_text = substitute_shared(tmpl.user_body);
  user_text = detail::replace_all(user_text, kInterviewSlot, context);
  if (reasoning.has_value()) {
    if (user_text.find(kReasoningSlot) == std::string::npos)
      throw ValidationError("template has no <Item-aware Reasoning Result> slot");
    user_text = detail::replace_all(user_text, kReasoningSlot, *reasoning);
  } else {
    user_text = detail::drop_slot_line(user_text, kReasoningSlot);
  }

  detail::check_no_unresolved_slots(system_text);
  detail::check_no_unresolved_slots(user_text);
  return {Message{MessageRole::system, std::move(system_text)},
          Message{MessageRole::user, std::move(user_text)}};
}

}  // namespace ipaeval
