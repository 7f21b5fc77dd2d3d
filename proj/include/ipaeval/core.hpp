#pragma once

// Session-level domain types: speakers, turns, sessions, client profiles.
// Everything is an immutable value after construction and safe to share
// across worker threads.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ipaeval/errors.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

enum class Speaker { therapist, client };

inline const char* to_string(Speaker s) {
  return s == Speaker::therapist ? "therapist" : "client";
}

/// Rendered transcript label ("Therapist"/"Client"). The corpus may carry
/// localized labels; those are normalized at ingestion, not here.
inline const char* speaker_label(Speaker s) {
  return s == Speaker::therapist ? "Therapist" : "Client";
}

inline std::optional<Speaker> speaker_from_string(std::string_view label) {
  auto key = detail::normalize_key(label);
  if (key == "therapist") return Speaker::therapist;
  if (key == "client") return Speaker::client;
  return std::nullopt;
}

/// One utterance. `text` must be non-empty after whitespace trimming.
struct Turn {
  Speaker speaker = Speaker::therapist;
  std::string text;

  bool operator==(const Turn&) const = default;
};

enum class SessionPhase { initial, final };

inline const char* to_string(SessionPhase p) {
  return p == SessionPhase::initial ? "initial" : "final";
}

inline std::optional<SessionPhase> phase_from_string(std::string_view s) {
  auto key = detail::normalize_key(s);
  if (key == "initial") return SessionPhase::initial;
  if (key == "final") return SessionPhase::final;
  return std::nullopt;
}

/// One clinical-interview session: an ordered, non-empty list of turns.
struct Session {
  std::string id;
  std::vector<Turn> turns;
  std::optional<SessionPhase> phase;
  std::string language = "en";  // BCP-47-style tag

  bool operator==(const Session&) const = default;
};

struct ClientProfile {
  std::string id;
  std::string attributes;  // optional free text: demographics, presenting concern

  bool operator==(const ClientProfile&) const = default;
};

inline void validate(const Turn& turn) {
  if (detail::trim(turn.text).empty()) throw ValidationError("turn text is empty");
}

inline void validate(const Session& session) {
  if (session.turns.empty()) throw ValidationError("session '" + session.id + "' has no turns");
  for (const auto& t : session.turns) validate(t);
}

inline void validate(const ClientProfile& profile) {
  if (profile.id.empty()) throw ValidationError("client profile id is empty");
}

// --- JSON conversions (structured-record wire format) ---

inline void to_json(nlohmann::json& j, const Turn& t) {
  j = nlohmann::json{{"speaker", to_string(t.speaker)}, {"text", t.text}};
}

inline void from_json(const nlohmann::json& j, Turn& t) {
  auto sp = speaker_from_string(j.at("speaker").get<std::string>());
  if (!sp) throw ParseError("unknown speaker label: " + j.at("speaker").get<std::string>());
  t.speaker = *sp;
  t.text = j.at("text").get<std::string>();
}

inline void to_json(nlohmann::json& j, const Session& s) {
  j = nlohmann::json{{"id", s.id}, {"language", s.language}, {"turns", s.turns}};
  if (s.phase) j["phase"] = to_string(*s.phase);
}

inline void from_json(const nlohmann::json& j, Session& s) {
  s.id = j.at("id").get<std::string>();
  s.turns = j.at("turns").get<std::vector<Turn>>();
  s.language = j.value("language", std::string("en"));
  s.phase.reset();
  if (j.contains("phase") && !j.at("phase").is_null()) {
    auto p = phase_from_string(j.at("phase").get<std::string>());
    if (!p) throw ParseError("unknown session phase: " + j.at("phase").get<std::string>());
    s.phase = *p;
  }
}

}  // namespace ipaeval
