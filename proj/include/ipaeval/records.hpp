#pragma once

// Result records shared across the pipeline: the per-session assessment
// record, PSDI values, and the paired-phase outcome record.

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipaeval/core.hpp"
#include "ipaeval/decode.hpp"
#include "ipaeval/psychometric.hpp"

namespace ipaeval {

/// Output of one two-stage assessment of one session. When the assessment
/// stage could not be decoded, `scores` holds the all-(-1) fallback and
/// `errors` records what happened.
struct AssessmentRecord {
  std::string client_id;
  std::string session_id;
  std::vector<ReasoningItem> reasoning;  // empty under ablation or stage-1 failure
  AssessmentScores scores;
  std::vector<FormatError> errors;
  int run_index = 0;
  std::string provider_model;

  bool operator==(const AssessmentRecord&) const = default;
};

/// Positive Symptom Distress Index: mean score over positive symptoms.
/// positive_count == 0 encodes "no positive symptoms" with value 0, below the
/// attainable positive minimum of 1.
struct PsdiValue {
  double value = 0.0;
  std::size_t positive_count = 0;              // N
  std::set<std::string> positive_dimensions;   // P

  bool operator==(const PsdiValue&) const = default;
};

enum class Direction { worsened, maintained_or_improved };

inline const char* to_string(Direction d) {
  return d == Direction::worsened ? "worsened" : "maintained_or_improved";
}

inline std::optional<Direction> direction_from_string(std::string_view s) {
  auto key = detail::normalize_key(s);
  if (key == "worsened") return Direction::worsened;
  if (key == "maintained_or_improved") return Direction::maintained_or_improved;
  return std::nullopt;
}

/// Paired-phase treatment outcome: PSDI at both phases, the change, and the
/// direction label (worsened iff delta > 0).
struct OutcomeRecord {
  std::string client_id;
  AssessmentRecord initial;
  AssessmentRecord final;
  PsdiValue psdi_initial;
  PsdiValue psdi_final;
  double delta = 0.0;
  Direction direction = Direction::maintained_or_improved;

  bool operator==(const OutcomeRecord&) const = default;
};

// --- JSON conversions (artifact record streams) ---

inline void to_json(nlohmann::json& j, const AssessmentRecord& r) {
  j = nlohmann::json{{"client_id", r.client_id},   {"session_id", r.session_id},
                     {"reasoning", r.reasoning},   {"scores", r.scores},
                     {"errors", r.errors},         {"run_index", r.run_index},
                     {"provider_model", r.provider_model}};
}

inline void from_json(const nlohmann::json& j, AssessmentRecord& r) {
  r.client_id = j.at("client_id").get<std::string>();
  r.session_id = j.at("session_id").get<std::string>();
  r.reasoning = j.at("reasoning").get<std::vector<ReasoningItem>>();
  r.scores = j.at("scores").get<AssessmentScores>();
  r.errors = j.at("errors").get<std::vector<FormatError>>();
  r.run_index = j.at("run_index").get<int>();
  r.provider_model = j.at("provider_model").get<std::string>();
}

inline void to_json(nlohmann::json& j, const PsdiValue& v) {
  j = nlohmann::json{{"value", v.value},
                     {"positive_count", v.positive_count},
                     {"positive_dimensions", v.positive_dimensions}};
}

inline void from_json(const nlohmann::json& j, PsdiValue& v) {
  v.value = j.at("value").get<double>();
  v.positive_count = j.at("positive_count").get<std::size_t>();
  v.positive_dimensions = j.at("positive_dimensions").get<std::set<std::string>>();
}

inline void to_json(nlohmann::json& j, const OutcomeRecord& r) {
  j = nlohmann::json{{"client_id", r.client_id},       {"initial", r.initial},
                     {"final", r.final},               {"psdi_initial", r.psdi_initial},
                     {"psdi_final", r.psdi_final},     {"delta", r.delta},
                     {"direction", to_string(r.direction)}};
}

inline void from_json(const nlohmann::json& j, OutcomeRecord& r) {
  r.client_id = j.at("client_id").get<std::string>();
  r.initial = j.at("initial").get<AssessmentRecord>();
  r.final = j.at("final").get<AssessmentRecord>();
  r.psdi_initial = j.at("psdi_initial").get<PsdiValue>();
  r.psdi_final = j.at("psdi_final").get<PsdiValue>();
  r.delta = j.at("delta").get<double>();
  auto d = direction_from_string(j.at("direction").get<std::string>());
  if (!d) throw ParseError("unknown outcome direction: " + j.at("direction").get<std::string>());
  r.direction = *d;
}

}  // namespace ipaeval
