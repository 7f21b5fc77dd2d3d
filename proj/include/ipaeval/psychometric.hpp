#pragma once

// Psychometric test definitions and scoring criteria. Tests are data, not
// code: the bundled SCL-90 below is also shipped as data/tests/scl90.json and
// any test following the same schema can be loaded at runtime.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ipaeval/errors.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

/// One symptom dimension of a test, with the checklist items mapped to it.
/// `item_descriptions` may be empty for simplified tests.
struct SymptomDimension {
  std::string name;
  std::string description;
  std::vector<std::string> item_descriptions;

  bool operator==(const SymptomDimension&) const = default;
};

struct PsychometricTest {
  std::string name;
  std::vector<SymptomDimension> dimensions;  // ordered; names unique

  bool operator==(const PsychometricTest&) const = default;

  /// Case-insensitive, whitespace-trimmed lookup. Returns nullptr on miss.
  const SymptomDimension* find_dimension(std::string_view label) const {
    auto key = detail::normalize_key(label);
    for (const auto& d : dimensions) {
      if (detail::normalize_key(d.name) == key) return &d;
    }
    return nullptr;
  }

  std::vector<std::string> dimension_names() const {
    std::vector<std::string> names;
    names.reserve(dimensions.size());
    for (const auto& d : dimensions) names.push_back(d.name);
    return names;
  }
};

/// Ordered map from integer score to its meaning.
struct ScoreCriteria {
  std::map<int, std::string> levels;

  bool operator==(const ScoreCriteria&) const = default;
};

/// True iff `score` is one of the enumerated criteria levels.
inline bool validate_score(int score, const ScoreCriteria& criteria) {
  return criteria.levels.count(score) > 0;
}

/// Per-dimension scores for one assessment. Valid instances cover the active
/// test's dimension set exactly, every value passing validate_score.
struct AssessmentScores {
  std::map<std::string, int> by_dimension;

  bool operator==(const AssessmentScores&) const = default;
};

/// Throws unless `scores` covers the test's dimensions exactly with valid values.
inline void validate_scores(const AssessmentScores& scores, const PsychometricTest& test,
                            const ScoreCriteria& criteria) {
  if (scores.by_dimension.size() != test.dimensions.size())
    throw ValidationError("score map does not cover the test's dimensions");
  for (const auto& d : test.dimensions) {
    auto it = scores.by_dimension.find(d.name);
    if (it == scores.by_dimension.end())
      throw ValidationError("score map is missing dimension: " + d.name);
    if (!validate_score(it->second, criteria))
      throw ValidationError("invalid score for " + d.name + ": " + std::to_string(it->second));
  }
}

/// The all-(-1) score map used when an assessment could not be decoded.
inline AssessmentScores fallback_scores(const PsychometricTest& test) {
  AssessmentScores s;
  for (const auto& d : test.dimensions) s.by_dimension[d.name] = -1;
  return s;
}

// --- Test-definition files ---
//
// Schema (see data/schemas/test_definition.schema.json):
//   { "name": "...", "dimensions": [ { "name": "...", "description": "...",
//                                      "items": ["...", ...] }, ... ] }

inline PsychometricTest load_test(std::string_view definition) {
  auto j = nlohmann::json::parse(definition, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError("test definition is not valid JSON");
  if (!j.is_object() || !j.contains("name") || !j.contains("dimensions"))
    throw ParseError("test definition must be an object with 'name' and 'dimensions'");
  if (!j["name"].is_string() || !j["dimensions"].is_array())
    throw ParseError("test definition fields have wrong types");

  PsychometricTest test;
  test.name = j["name"].get<std::string>();
  std::set<std::string> seen;
  for (const auto& dj : j["dimensions"]) {
    if (!dj.is_object() || !dj.contains("name") || !dj["name"].is_string())
      throw ParseError("each dimension needs a string 'name'");
    SymptomDimension dim;
    dim.name = dj["name"].get<std::string>();
    dim.description = dj.value("description", std::string());
    if (dj.contains("items")) {
      if (!dj["items"].is_array()) throw ParseError("dimension 'items' must be an array");
      for (const auto& item : dj["items"]) {
        if (!item.is_string()) throw ParseError("dimension items must be strings");
        dim.item_descriptions.push_back(item.get<std::string>());
      }
    }
    auto key = detail::normalize_key(dim.name);
    if (!seen.insert(key).second)
      throw ValidationError("duplicate dimension name: " + dim.name);
    test.dimensions.push_back(std::move(dim));
  }
  if (test.dimensions.empty()) throw ValidationError("test has no dimensions");
  return test;
}

inline std::string serialize_test(const PsychometricTest& test) {
  nlohmann::json j;
  j["name"] = test.name;
  j["dimensions"] = nlohmann::json::array();
  for (const auto& d : test.dimensions) {
    j["dimensions"].push_back(
        {{"name", d.name}, {"description", d.description}, {"items", d.item_descriptions}});
  }
  return j.dump(2) + "\n";
}

// --- Prompt renderings ---

/// Plain-text rendering of a test for the `<Psychometric Test>` prompt slot.
inline std::string render_test(const PsychometricTest& test) {
  std::string out;
  for (const auto& d : test.dimensions) {
    out += d.name;
    if (!d.description.empty()) {
      out += ": ";
      out += d.description;
    }
    out += '\n';
    if (!d.item_descriptions.empty()) {
      out += "  Items: ";
      for (std::size_t i = 0; i < d.item_descriptions.size(); ++i) {
        if (i) out += "; ";
        out += d.item_descriptions[i];
      }
      out += '\n';
    }
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

/// "Scoring criteria: ..." block listing every level of `criteria`.
inline std::string render_score_criteria(const ScoreCriteria& criteria) {
  std::string out = "Scoring criteria: ";
  bool first = true;
  for (const auto& [score, description] : criteria.levels) {
    if (!first) out += ", ";
    first = false;
    std::string desc = description;
    while (!desc.empty() && (desc.back() == '.' || desc.back() == ' ')) desc.pop_back();
    out += std::to_string(score) + " (" + desc + ")";
  }
  out += ".";
  return out;
}

// --- Bundled defaults ---

/// Scoring criteria for symptom assessment: -1 symptom not addressed,
/// 0 addressed but absent, 1 minimal, 2 clear symptoms.
inline const ScoreCriteria& default_score_criteria() {
  static const ScoreCriteria criteria{{
      {-1, "Symptom not addressed."},
      {0, "Symptom addressed, but no symptoms found; no signs of distress or dysfunction."},
      {1, "Minimal symptoms, minor indications of distress but no significant dysfunction."},
      {2, "Clear symptoms, clear indications of distress, and significant dysfunction."},
  }};
  return criteria;
}

/// The bundled Symptom Checklist-90: 90 items grouped into the standard ten
/// symptom dimensions. Assessment happens at dimension level; the items feed
/// the reasoning prompt so extracted statements can be tied to specific items.
inline const PsychometricTest& scl90() {
  static const PsychometricTest test = [] {
    PsychometricTest t;
    t.name = "SCL-90";
    t.dimensions = {
        {"somatization",
         "Distress arising from perceptions of bodily dysfunction, including cardiovascular, "
         "gastrointestinal, respiratory, and other somatic complaints.",
         {"Headaches", "Faintness or dizziness", "Pains in heart or chest",
          "Pains in lower back", "Nausea or upset stomach", "Soreness of your muscles",
          "Trouble getting your breath", "Hot or cold spells",
          "Numbness or tingling in parts of your body", "A lump in your throat",
          "Feeling weak in parts of your body", "Heavy feelings in your arms or legs"}},
        {"obsessive-compulsive",
         "Thoughts, impulses, and actions experienced as unremitting and irresistible while "
         "being unwanted.",
         {"Repeated unpleasant thoughts that won't leave your mind", "Trouble remembering things",
          "Worried about sloppiness or carelessness", "Feeling blocked in getting things done",
          "Having to do things very slowly to insure correctness",
          "Having to check and double-check what you do", "Difficulty making decisions",
          "Your mind going blank", "Trouble concentrating",
          "Having to repeat the same actions such as touching, counting, or washing"}},
        {"interpersonal sensitivity",
         "Feelings of personal inadequacy and inferiority in comparison with others, "
         "self-deprecation, and marked discomfort during interpersonal interactions.",
         {"Feeling critical of others", "Feeling shy or uneasy with the opposite sex",
          "Your feelings being easily hurt",
          "Feeling others do not understand you or are unsympathetic",
          "Feeling that people are unfriendly or dislike you", "Feeling inferior to others",
          "Feeling uneasy when people are watching or talking about you",
          "Feeling very self-conscious with others",
          "Feeling uncomfortable about eating or drinking in public"}},
        {"depression",
         "Dysphoric mood and affect, withdrawal of interest, loss of energy, hopelessness, "
         "and related cognitive and somatic correlates.",
         {"Loss of sexual interest or pleasure", "Feeling low in energy or slowed down",
          "Thoughts of ending your life", "Crying easily", "Feelings of being trapped or caught",
          "Blaming yourself for things", "Feeling lonely", "Feeling blue",
          "Worrying too much about things", "Feeling no interest in things",
          "Feeling hopeless about the future", "Feeling everything is an effort",
          "Feelings of worthlessness"}},
        {"anxiety",
         "Nervousness, tension, trembling, panic attacks, apprehension, and feelings of dread.",
         {"Nervousness or shakiness inside", "Trembling", "Suddenly scared for no reason",
          "Feeling fearful", "Heart pounding or racing", "Feeling tense or keyed up",
          "Spells of terror or panic", "Feeling so restless you couldn't sit still",
          "The feeling that something bad is going to happen to you",
          "Thoughts and images of a frightening nature"}},
        {"hostility",
         "Thoughts, feelings, or actions characteristic of anger: aggression, irritability, "
         "rage, and resentment.",
         {"Feeling easily annoyed or irritated", "Temper outbursts that you could not control",
          "Having urges to beat, injure, or harm someone",
          "Having urges to break or smash things", "Getting into frequent arguments",
          "Shouting or throwing things"}},
        {"phobic anxiety",
         "Persistent fear of a specific person, place, object, or situation that is irrational "
         "and disproportionate to the stimulus and leads to avoidance.",
         {"Feeling afraid in open spaces or on the streets",
          "Feeling afraid to go out of your house alone",
          "Feeling afraid to travel on buses, subways, or trains",
          "Having to avoid certain things, places, or activities because they frighten you",
          "Feeling uneasy in crowds, such as shopping or at a movie",
          "Feeling nervous when you are left alone",
          "Feeling afraid you will faint in public"}},
        {"paranoid ideation",
         "Disordered thinking marked by suspiciousness, hostility, grandiosity, fear of loss "
         "of autonomy, and projection.",
         {"Feeling others are to blame for most of your troubles",
          "Feeling that most people cannot be trusted",
          "Feeling that you are watched or talked about by others",
          "Having ideas or beliefs that others do not share",
          "Others not giving you proper credit for your achievements",
          "Feeling that people will take advantage of you if you let them"}},
        {"psychoticism",
         "A continuum from mild interpersonal alienation to dramatic evidence of psychosis, "
         "including withdrawal, isolation, and first-rank symptoms.",
         {"The idea that someone else can control your thoughts",
          "Hearing voices that other people do not hear",
          "Other people being aware of your private thoughts",
          "Having thoughts that are not your own",
          "Feeling lonely even when you are with people",
          "Having thoughts about sex that bother you a lot",
          "The idea that you should be punished for your sins",
          "The idea that something serious is wrong with your body",
          "Never feeling close to another person",
          "The idea that something is wrong with your mind"}},
        {"additional items",
         "Clinically relevant indicators of appetite and sleep disturbance, guilt, and "
         "thoughts of death that contribute to the global indices.",
         {"Poor appetite", "Trouble falling asleep", "Thoughts of death or dying", "Overeating",
          "Awakening in the early morning", "Sleep that is restless or disturbed",
          "Feelings of guilt"}},
    };
    return t;
  }();
  return test;
}

// --- JSON conversions ---

inline void to_json(nlohmann::json& j, const AssessmentScores& s) {
  j = nlohmann::json::object();
  for (const auto& [name, score] : s.by_dimension) j[name] = score;
}

inline void from_json(const nlohmann::json& j, AssessmentScores& s) {
  s.by_dimension.clear();
  for (auto it = j.begin(); it != j.end(); ++it) s.by_dimension[it.key()] = it.value().get<int>();
}

}  // namespace ipaeval
