#pragma once

// Client-informed input assembly: the profile, the current session, and
// optional history (past sessions, assessments, outcomes) composed into one
// immutable value, plus its deterministic text rendering for prompt insertion.

#include <string>
#include <vector>

#include "ipaeval/core.hpp"
#include "ipaeval/records.hpp"

namespace ipaeval {

/// Meta client-contextual information from the past. Lists may be empty and
/// are ordered chronologically.
struct ClientHistory {
  std::vector<Session> past_sessions;
  std::vector<AssessmentScores> past_assessments;
  std::vector<OutcomeRecord> past_outcomes;

  bool empty() const {
    return past_sessions.empty() && past_assessments.empty() && past_outcomes.empty();
  }

  bool operator==(const ClientHistory&) const = default;
};

/// Selects which history parts to retain when assembling client information.
/// Default-constructed flags keep only the current session; history is opt-in.
struct HistoryInclusion {
  bool past_sessions = false;
  bool past_assessments = false;
  bool past_outcomes = false;

  static HistoryInclusion all() { return {true, true, true}; }
  static HistoryInclusion none() { return {}; }
};

/// The composed client-informed input of one assessment.
struct ClientInformation {
  ClientProfile profile;
  Session session;
  ClientHistory history;

  bool operator==(const ClientInformation&) const = default;
};

/// Compose profile, current session, and the selected history parts.
/// Rejects empty sessions and a current session that also appears in history.
inline ClientInformation assemble_client_information(const ClientProfile& profile,
                                                     const Session& session,
                                                     const ClientHistory& history,
                                                     HistoryInclusion include = {}) {
  validate(profile);
  if (session.turns.empty())
    throw ValidationError("current session '" + session.id + "' has no turns");
  validate(session);
  for (const auto& past : history.past_sessions) {
    if (past.id == session.id)
      throw ValidationError("current session '" + session.id + "' is also in the history");
  }

  ClientInformation info;
  info.profile = profile;
  info.session = session;
  if (include.past_sessions) info.history.past_sessions = history.past_sessions;
  if (include.past_assessments) info.history.past_assessments = history.past_assessments;
  if (include.past_outcomes) info.history.past_outcomes = history.past_outcomes;
  return info;
}

namespace detail {

inline std::string render_transcript(const Session& session) {
  std::string out;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    if (i) out += '\n';
    out += speaker_label(session.turns[i].speaker);
    out += ": ";
    out += session.turns[i].text;
  }
  return out;
}

}  // namespace detail

/// The rendered context as an ordered list of blocks: profile, past material
/// in chronological order, then the current-session transcript. Adding a
/// history part only inserts blocks; it never rewrites the others.
inline std::vector<std::string> render_context_blocks(const ClientInformation& info) {
  std::vector<std::string> blocks;

  std::string head = "Client ID: " + info.profile.id;
  if (!info.profile.attributes.empty()) head += "\nProfile: " + info.profile.attributes;
  blocks.push_back(std::move(head));

  for (std::size_t i = 0; i < info.history.past_sessions.size(); ++i) {
    const auto& s = info.history.past_sessions[i];
    blocks.push_back("Past Session " + std::to_string(i + 1) + " (" + s.id + "):\n" +
                     detail::render_transcript(s));
  }
  for (std::size_t i = 0; i < info.history.past_assessments.size(); ++i) {
    std::string block = "Past Assessment " + std::to_string(i + 1) + ":";
    for (const auto& [name, score] : info.history.past_assessments[i].by_dimension) {
      block += '\n' + name + ": " + std::to_string(score);
    }
    blocks.push_back(std::move(block));
  }
  for (std::size_t i = 0; i < info.history.past_outcomes.size(); ++i) {
    const auto& o = info.history.past_outcomes[i];
    blocks.push_back("Past Outcome " + std::to_string(i + 1) + ": PSDI " +
                     detail::format_double(o.psdi_initial.value) + " -> " +
                     detail::format_double(o.psdi_final.value) + " (delta " +
                     detail::format_double(o.delta) + ", " + to_string(o.direction) + ")");
  }

  blocks.push_back("Current Session:\n" + detail::render_transcript(info.session));
  return blocks;
}

/// Deterministic text rendering of the client information for the
/// `<Interview>` prompt slot. Pure: identical inputs yield identical bytes.
inline std::string render_context(const ClientInformation& info) {
  auto blocks = render_context_blocks(info);
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += "\n\n";
    out += blocks[i];
  }
  return out;
}

}  // namespace ipaeval
