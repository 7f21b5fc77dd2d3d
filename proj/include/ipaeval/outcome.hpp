#pragma once

// Session-focused client-dynamics assessment: PSDI over positive symptoms,
// the paired-phase change, and the treatment-outcome direction label.

#include <set>
#include <string>

#include "ipaeval/engine.hpp"
#include "ipaeval/records.hpp"

namespace ipaeval {

/// Scores of 1 and 2 indicate a present symptom; 0 means addressed but
/// absent and -1 means not addressed, so neither is positive.
inline constexpr int kPositiveScoreMin = 1;

/// The dimensions whose score marks a positive symptom (score >= 1).
inline std::set<std::string> positive_indices(const AssessmentScores& scores) {
  std::set<std::string> positive;
  for (const auto& [name, score] : scores.by_dimension) {
    if (score >= kPositiveScoreMin) positive.insert(name);
  }
  return positive;
}

/// Positive Symptom Distress Index: the mean score over positive symptoms.
/// With no positive symptoms the value is defined as 0 and positive_count
/// keeps that case distinguishable from genuine low scores.
inline PsdiValue psdi(const AssessmentScores& scores) {
  PsdiValue v;
  v.positive_dimensions = positive_indices(scores);
  v.positive_count = v.positive_dimensions.size();
  if (v.positive_count == 0) return v;
  long long sum = 0;
  for (const auto& name : v.positive_dimensions) sum += scores.by_dimension.at(name);
  v.value = static_cast<double>(sum) / static_cast<double>(v.positive_count);
  return v;
}

/// Change in PSDI from before to after treatment.
inline double delta_psdi(const PsdiValue& initial, const PsdiValue& final) {
  return final.value - initial.value;
}

/// delta > 0 means worsening or newly emerged symptoms; delta <= 0 means
/// symptom maintenance or improvement.
inline Direction classify_outcome(double delta) {
  return delta > 0.0 ? Direction::worsened : Direction::maintained_or_improved;
}

/// Assess both phases of one client independently (neither phase sees the
/// other's outputs), then derive PSDI change and direction.
inline OutcomeRecord evaluate_outcome(const ClientInformation& initial,
                                      const ClientInformation& final,
                                      const EngineConfig& config, Provider& provider) {
  if (initial.profile.id != final.profile.id)
    throw ValidationError("phase pair has mismatched client ids: '" + initial.profile.id +
                          "' vs '" + final.profile.id + "'");

  OutcomeRecord record;
  record.client_id = initial.profile.id;
  record.initial = assess(initial, config, provider);
  record.final = assess(final, config, provider);
  record.psdi_initial = psdi(record.initial.scores);
  record.psdi_final = psdi(record.final.scores);
  record.delta = delta_psdi(record.psdi_initial, record.psdi_final);
  record.direction = classify_outcome(record.delta);
  return record;
}

}  // namespace ipaeval
