#pragma once

// Strict structured-output decoding for both pipeline stages, preceded by a
// lenient pre-clean (markdown fences stripped, outermost JSON value located).
// Decoders are total: any byte string yields either a valid value or a
// FormatError; they never throw. A format error is a measured model
// behavior, so it is reported, not retried.

#include <cstdlib>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ipaeval/psychometric.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

enum class FormatErrorKind {
  not_structured,    // no parseable JSON value anywhere in the output
  schema_violation,  // JSON found, but fields missing or mistyped
  invalid_score,     // a score outside the criteria's enumerated levels
  missing_dimension, // score map does not cover every test dimension
  unknown_dimension, // a name that is not a dimension of the active test
  empty_response,    // provider returned nothing usable at all
};

inline const char* to_string(FormatErrorKind k) {
  switch (k) {
    case FormatErrorKind::not_structured: return "not_structured";
    case FormatErrorKind::schema_violation: return "schema_violation";
    case FormatErrorKind::invalid_score: return "invalid_score";
    case FormatErrorKind::missing_dimension: return "missing_dimension";
    case FormatErrorKind::unknown_dimension: return "unknown_dimension";
    case FormatErrorKind::empty_response: return "empty_response";
  }
  return "unknown";
}

struct FormatError {
  FormatErrorKind kind = FormatErrorKind::not_structured;
  std::string detail;
  std::string raw_excerpt;

  bool operator==(const FormatError&) const = default;
};

/// One items-aware reasoning record: an extracted client statement tied to a
/// test dimension and specific item, with a presence judgment and explanation.
struct ReasoningItem {
  std::string client_statement;
  std::string symptom_category;  // canonical dimension name of the active test
  std::string specific_symptom;
  bool presence = false;
  std::string explanation;

  bool operator==(const ReasoningItem&) const = default;
};

template <typename T>
using DecodeResult = std::variant<T, FormatError>;

namespace detail {

inline std::string excerpt(std::string_view raw) {
  auto t = trim(raw);
  if (t.size() > 160) return std::string(t.substr(0, 160)) + "...";
  return std::string(t);
}

inline FormatError make_error(FormatErrorKind kind, std::string detail, std::string_view raw) {
  return FormatError{kind, std::move(detail), excerpt(raw)};
}

// Span of the first balanced {...} or [...] outside string literals.
inline std::optional<std::string_view> balanced_json_span(std::string_view text) {
  auto start = text.find_first_of("{[");
  while (start != std::string_view::npos) {
    char open = text[start];
    char close = open == '{' ? '}' : ']';
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == open) ++depth;
      else if (c == close) {
        --depth;
        if (depth == 0) return text.substr(start, i - start + 1);
      }
    }
    start = text.find_first_of("{[", start + 1);
  }
  return std::nullopt;
}

// Lenient pre-clean: prefer a fenced block body, else the first balanced
// JSON value embedded in prose.
inline std::optional<std::string> structured_candidate(std::string_view raw) {
  auto text = trim(raw);
  auto fence = text.find("```");
  if (fence != std::string_view::npos) {
    auto body_start = text.find('\n', fence);
    if (body_start != std::string_view::npos) {
      auto fence_end = text.find("```", body_start);
      if (fence_end != std::string_view::npos) {
        auto body = trim(text.substr(body_start + 1, fence_end - body_start - 1));
        if (!body.empty()) return std::string(body);
      }
    }
  }
  if (auto span = balanced_json_span(text)) return std::string(*span);
  return std::nullopt;
}

inline std::optional<nlohmann::json> parse_candidate(std::string_view raw) {
  auto candidate = structured_candidate(raw);
  if (!candidate) return std::nullopt;
  auto j = nlohmann::json::parse(*candidate, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    // fenced body may carry prose around the value; fall back to a balanced span
    if (auto span = balanced_json_span(*candidate)) {
      j = nlohmann::json::parse(*span, nullptr, false);
      if (!j.is_discarded()) return j;
    }
    return std::nullopt;
  }
  return j;
}

inline std::optional<bool> coerce_presence(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    auto n = v.get<long long>();
    if (n == 0 || n == 1) return n == 1;
    return std::nullopt;
  }
  if (v.is_string()) {
    auto s = normalize_key(v.get<std::string>());
    if (s == "yes" || s == "true" || s == "y" || s == "present" || s == "1") return true;
    if (s == "no" || s == "false" || s == "n" || s == "absent" || s == "0") return false;
  }
  return std::nullopt;
}

inline std::optional<int> coerce_score(const nlohmann::json& v) {
  if (v.is_number_integer()) return static_cast<int>(v.get<long long>());
  if (v.is_number_float()) {
    double d = v.get<double>();
    int i = static_cast<int>(d);
    if (static_cast<double>(i) == d) return i;
    return std::nullopt;
  }
  if (v.is_string()) {
    auto s = std::string(trim(v.get<std::string>()));
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    long n = std::strtol(s.c_str(), &end, 10);
    if (end && *end == '\0') return static_cast<int>(n);
  }
  return std::nullopt;
}

// Field lookup tolerating capitalized / spaced key variants ("Client Statement").
inline const nlohmann::json* find_field(const nlohmann::json& obj,
                                        std::initializer_list<std::string_view> names) {
  for (auto name : names) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      auto key = normalize_key(it.key());
      std::string folded;
      for (char c : key) folded += (c == ' ' || c == '-') ? '_' : c;
      if (folded == name) return &it.value();
    }
  }
  return nullptr;
}

}  // namespace detail

/// Decode stage-1 output into reasoning items validated against `test`.
/// Accepts either {"items": [...]} or a bare array; a single item object is
/// treated as a one-element list.
inline DecodeResult<std::vector<ReasoningItem>> decode_reasoning(std::string_view raw,
                                                                 const PsychometricTest& test) {
  using detail::make_error;
  if (detail::trim(raw).empty())
    return make_error(FormatErrorKind::empty_response, "provider returned an empty response", raw);

  auto parsed = detail::parse_candidate(raw);
  if (!parsed)
    return make_error(FormatErrorKind::not_structured, "no JSON value found in output", raw);

  nlohmann::json items = nlohmann::json::array();
  if (parsed->is_array()) {
    items = *parsed;
  } else if (parsed->is_object()) {
    if (auto* f = detail::find_field(*parsed, {"items", "reasoning", "results"})) {
      if (!f->is_array())
        return make_error(FormatErrorKind::schema_violation, "'items' is not an array", raw);
      items = *f;
    } else if (detail::find_field(*parsed, {"symptom_category", "category"})) {
      items.push_back(*parsed);
    } else {
      return make_error(FormatErrorKind::schema_violation,
                        "object has no 'items' array and is not an item itself", raw);
    }
  } else {
    return make_error(FormatErrorKind::schema_violation, "top-level JSON value is not an object or array",
                      raw);
  }

  std::vector<ReasoningItem> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& ij = items[i];
    auto at = "item " + std::to_string(i);
    if (!ij.is_object())
      return make_error(FormatErrorKind::schema_violation, at + " is not an object", raw);

    const auto* statement = detail::find_field(ij, {"client_statement", "statement"});
    const auto* category = detail::find_field(ij, {"symptom_category", "category"});
    const auto* specific = detail::find_field(ij, {"specific_symptom", "symptom", "item"});
    const auto* presence = detail::find_field(ij, {"presence", "present"});
    const auto* explanation = detail::find_field(ij, {"explanation", "reason"});
    if (!statement || !category || !specific || !presence || !explanation)
      return make_error(FormatErrorKind::schema_violation, at + " is missing required fields", raw);
    if (!statement->is_string() || !category->is_string() || !specific->is_string() ||
        !explanation->is_string())
      return make_error(FormatErrorKind::schema_violation, at + " has non-string text fields", raw);

    auto presence_value = detail::coerce_presence(*presence);
    if (!presence_value)
      return make_error(FormatErrorKind::schema_violation, at + " has an unreadable presence value",
                        raw);

    const auto* dim = test.find_dimension(category->get<std::string>());
    if (!dim)
      return make_error(FormatErrorKind::unknown_dimension,
                        "symptom category '" + category->get<std::string>() +
                            "' is not a dimension of " + test.name,
                        raw);

    ReasoningItem item;
    item.client_statement = statement->get<std::string>();
    item.symptom_category = dim->name;  // canonical spelling
    item.specific_symptom = specific->get<std::string>();
    item.presence = *presence_value;
    item.explanation = explanation->get<std::string>();
    if (detail::trim(item.explanation).empty())
      return make_error(FormatErrorKind::schema_violation, at + " has an empty explanation", raw);
    out.push_back(std::move(item));
  }
  return out;
}

/// Decode stage-2 output into a complete, valid score map. Accepts either
/// {"scores": {...}} or a bare score object.
inline DecodeResult<AssessmentScores> decode_assessment(std::string_view raw,
                                                        const PsychometricTest& test,
                                                        const ScoreCriteria& criteria) {
  using detail::make_error;
  if (detail::trim(raw).empty())
    return make_error(FormatErrorKind::empty_response, "provider returned an empty response", raw);

  auto parsed = detail::parse_candidate(raw);
  if (!parsed)
    return make_error(FormatErrorKind::not_structured, "no JSON value found in output", raw);
  if (!parsed->is_object())
    return make_error(FormatErrorKind::schema_violation, "top-level JSON value is not an object", raw);

  const nlohmann::json* score_obj = &*parsed;
  if (auto* f = detail::find_field(*parsed, {"scores", "assessment", "assessment_scores"})) {
    if (!f->is_object())
      return make_error(FormatErrorKind::schema_violation, "'scores' is not an object", raw);
    score_obj = f;
  }

  AssessmentScores scores;
  for (auto it = score_obj->begin(); it != score_obj->end(); ++it) {
    const auto* dim = test.find_dimension(it.key());
    if (!dim)
      return make_error(FormatErrorKind::unknown_dimension,
                        "'" + it.key() + "' is not a dimension of " + test.name, raw);
    if (scores.by_dimension.count(dim->name))
      return make_error(FormatErrorKind::schema_violation,
                        "dimension scored more than once: " + dim->name, raw);
    auto value = detail::coerce_score(it.value());
    if (!value)
      return make_error(FormatErrorKind::schema_violation,
                        "score for " + dim->name + " is not an integer", raw);
    if (!validate_score(*value, criteria))
      return make_error(FormatErrorKind::invalid_score,
                        dim->name + "=" + std::to_string(*value) + " is outside the criteria levels",
                        raw);
    scores.by_dimension[dim->name] = *value;
  }

  if (scores.by_dimension.size() != test.dimensions.size()) {
    std::string missing;
    for (const auto& d : test.dimensions) {
      if (!scores.by_dimension.count(d.name)) {
        if (!missing.empty()) missing += ", ";
        missing += d.name;
      }
    }
    return make_error(FormatErrorKind::missing_dimension, "missing dimensions: " + missing, raw);
  }
  return scores;
}

// --- Canonical encoders ---
//
// The canonical wire schemas for both stages; decode(encode(x)) == x. These
// are also what the engine feeds to stage 2 so stage-1 formatting noise never
// reaches the assessment prompt.

inline void to_json(nlohmann::json& j, const ReasoningItem& item) {
  j = nlohmann::json{{"client_statement", item.client_statement},
                     {"symptom_category", item.symptom_category},
                     {"specific_symptom", item.specific_symptom},
                     {"presence", item.presence},
                     {"explanation", item.explanation}};
}

inline void from_json(const nlohmann::json& j, ReasoningItem& item) {
  item.client_statement = j.at("client_statement").get<std::string>();
  item.symptom_category = j.at("symptom_category").get<std::string>();
  item.specific_symptom = j.at("specific_symptom").get<std::string>();
  item.presence = j.at("presence").get<bool>();
  item.explanation = j.at("explanation").get<std::string>();
}

inline std::string encode_reasoning(const std::vector<ReasoningItem>& items) {
  nlohmann::json j;
  j["items"] = items;
  return j.dump(2);
}

inline std::string encode_assessment(const AssessmentScores& scores) {
  nlohmann::json j;
  j["scores"] = scores;
  return j.dump(2);
}

inline void to_json(nlohmann::json& j, const FormatError& e) {
  j = nlohmann::json{{"kind", to_string(e.kind)}, {"detail", e.detail}, {"raw_excerpt", e.raw_excerpt}};
}

inline void from_json(const nlohmann::json& j, FormatError& e) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "not_structured") e.kind = FormatErrorKind::not_structured;
  else if (kind == "schema_violation") e.kind = FormatErrorKind::schema_violation;
  else if (kind == "invalid_score") e.kind = FormatErrorKind::invalid_score;
  else if (kind == "missing_dimension") e.kind = FormatErrorKind::missing_dimension;
  else if (kind == "unknown_dimension") e.kind = FormatErrorKind::unknown_dimension;
  else if (kind == "empty_response") e.kind = FormatErrorKind::empty_response;
  else throw ParseError("unknown format-error kind: " + kind);
  e.detail = j.at("detail").get<std::string>();
  e.raw_excerpt = j.at("raw_excerpt").get<std::string>();
}

}  // namespace ipaeval
