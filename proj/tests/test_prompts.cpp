#include <doctest.h>

#include <filesystem>

#include "ipaeval/prompts.hpp"
#include "ipaeval/psychometric.hpp"
#include "ipaeval/util.hpp"

using namespace ipaeval;

namespace {

std::string flatten(const std::vector<Message>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += to_string(m.role);
    out += ":\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("default reasoning prompt carries the published directives") {
  auto tmpl = default_reasoning_template(scl90());
  CHECK(tmpl.kind == PromptKind::items_reasoning);
  CHECK(tmpl.components.directives.find("determine the presence or absence of symptoms") !=
        std::string::npos);
  CHECK(tmpl.system_body.find("Imagine you are a skilled psychologist") != std::string::npos);
  CHECK(tmpl.system_body.find("Symptom Checklist-90:") != std::string::npos);
  CHECK(tmpl.system_body.find("Presence of Symptoms:") != std::string::npos);
  // the published directive text runs the two sentences together
  CHECK(tmpl.system_body.find("not present.SCL-90 is a psychological symptom assessment tool") !=
        std::string::npos);
  CHECK(tmpl.user_body.find("<Interview>") != std::string::npos);
}

TEST_CASE("default assessment prompt carries criteria and the end-of-interview caveat") {
  auto tmpl = default_assessment_template(scl90(), default_score_criteria());
  CHECK(tmpl.kind == PromptKind::symptom_assessment);
  CHECK(tmpl.system_body.find("qualitative score (-1-2) for each symptom category") !=
        std::string::npos);
  CHECK(tmpl.system_body.find(
            "based on the state at the end of the interview") != std::string::npos);
  // criteria block lists exactly four levels
  auto criteria_pos = tmpl.system_body.find("Scoring criteria:");
  REQUIRE(criteria_pos != std::string::npos);
  auto block = tmpl.system_body.substr(criteria_pos, tmpl.system_body.find('\n', criteria_pos) -
                                                         criteria_pos);
  CHECK(detail::count_occurrences(block, "-1 (") == 1);
  CHECK(detail::count_occurrences(block, " 0 (") == 1);
  CHECK(detail::count_occurrences(block, " 1 (") == 1);
  CHECK(detail::count_occurrences(block, " 2 (") == 1);
  CHECK(tmpl.user_body.find("<Item-aware Reasoning Result>") != std::string::npos);
}

TEST_CASE("builders are deterministic") {
  auto a = default_assessment_template(scl90(), default_score_criteria());
  auto b = default_assessment_template(scl90(), default_score_criteria());
  CHECK(a == b);
  CHECK(default_reasoning_template(scl90()) == default_reasoning_template(scl90()));
}

TEST_CASE("builders reject missing components") {
  auto components = PromptComponents::reasoning_defaults();
  components.role_text.clear();
  CHECK_THROWS_AS(build_reasoning_prompt(components, scl90()), ValidationError);

  auto with_criteria = PromptComponents::reasoning_defaults();
  with_criteria.score_criteria = "stray";
  CHECK_THROWS_AS(build_reasoning_prompt(with_criteria, scl90()), ValidationError);

  auto assessment = PromptComponents::assessment_defaults();
  assessment.score_criteria.reset();
  CHECK_THROWS_AS(build_assessment_prompt(assessment, scl90(), ScoreCriteria{}), ValidationError);
  // a criteria map can stand in for the missing rendering
  CHECK_NOTHROW(build_assessment_prompt(assessment, scl90(), default_score_criteria()));
}

TEST_CASE("custom criteria render into the criteria block") {
  auto components = PromptComponents::assessment_defaults();
  components.score_criteria.reset();
  ScoreCriteria criteria{{{0, "absent"}, {1, "present"}}};
  auto tmpl = build_assessment_prompt(components, scl90(), criteria);
  CHECK(tmpl.system_body.find("Scoring criteria: 0 (absent), 1 (present).") != std::string::npos);
}

TEST_CASE("render_messages resolves every slot exactly once") {
  auto tmpl = default_assessment_template(scl90(), default_score_criteria());
  auto messages = render_messages(tmpl, "INTERVIEW-TEXT", std::string("REASONING-TEXT"));
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].role == MessageRole::system);
  CHECK(messages[1].role == MessageRole::user);
  auto text = flatten(messages);
  CHECK(detail::count_occurrences(text, "INTERVIEW-TEXT") == 1);
  CHECK(detail::count_occurrences(text, "REASONING-TEXT") == 1);
  for (auto slot : {kTestSlot, kFormatSlot, kInterviewSlot, kReasoningSlot}) {
    CHECK(text.find(slot) == std::string::npos);
  }
  // the test rendering landed in the system message
  CHECK(messages[0].content.find("somatization") != std::string::npos);
  CHECK(messages[0].content.find("Scoring criteria:") != std::string::npos);
}

TEST_CASE("ablated rendering omits the reasoning block entirely") {
  auto tmpl = default_assessment_template(scl90(), default_score_criteria());
  auto with = render_messages(tmpl, "CTX", std::string("REASONING-BLOCK"));
  auto without = render_messages(tmpl, "CTX");
  CHECK(with[0] == without[0]);  // system message identical

  // the ablated user text is the full one minus the reasoning line
  auto pos = with[1].content.find("REASONING-BLOCK\n");
  REQUIRE(pos != std::string::npos);
  auto reconstructed = with[1].content;
  reconstructed.erase(pos, std::string("REASONING-BLOCK\n").size());
  CHECK(reconstructed == without[1].content);
  CHECK(without[1].content.find("Item-aware") == std::string::npos);
}

TEST_CASE("reasoning text supplied to a reasoning template is a slot mismatch") {
  auto tmpl = default_reasoning_template(scl90());
  CHECK_THROWS_AS(render_messages(tmpl, "CTX", std::string("unexpected")), ValidationError);
  CHECK_NOTHROW(render_messages(tmpl, "CTX"));
}

TEST_CASE("rendering is pure") {
  auto tmpl = default_assessment_template(scl90(), default_score_criteria());
  CHECK(render_messages(tmpl, "CTX", std::string("R")) ==
        render_messages(tmpl, "CTX", std::string("R")));
}

TEST_CASE("template files load and render like the built-in defaults") {
  auto dir = std::filesystem::path(IPAEVAL_DATA_DIR) / "templates";
  auto reasoning = load_prompt_template(detail::read_file(dir / "items_reasoning.txt"),
                                        PromptKind::items_reasoning, scl90());
  auto assessment = load_prompt_template(detail::read_file(dir / "symptom_assessment.txt"),
                                         PromptKind::symptom_assessment, scl90());
  CHECK(render_messages(reasoning, "CTX") ==
        render_messages(default_reasoning_template(scl90()), "CTX"));
  CHECK(render_messages(assessment, "CTX", std::string("R")) ==
        render_messages(default_assessment_template(scl90(), default_score_criteria()), "CTX",
                        std::string("R")));
}

TEST_CASE("a custom template file renders through the same slot interface") {
  std::string body =
      "You are assisting with an intake review.\n"
      "Instrument:\n<Psychometric Test>\n\n"
      "Answer as instructed:\n<Format Instructions>\n\n"
      "Material follows.\n<Interview>\n<Item-aware Reasoning Result>\n"
      "End of material.";
  auto tmpl = load_prompt_template(body, PromptKind::symptom_assessment, scl90(), "reply in JSON");
  auto messages = render_messages(tmpl, "THE-INTERVIEW", std::string("THE-REASONING"));
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].content.find("intake review") != std::string::npos);
  CHECK(messages[0].content.find("reply in JSON") != std::string::npos);
  CHECK(messages[0].content.find("somatization") != std::string::npos);
  CHECK(messages[1].content.rfind("THE-INTERVIEW", 0) == 0);
  CHECK(messages[1].content.find("THE-REASONING") != std::string::npos);
  CHECK(messages[1].content.find("End of material.") != std::string::npos);

  auto ablated = render_messages(tmpl, "THE-INTERVIEW");
  CHECK(ablated[1].content.find("THE-REASONING") == std::string::npos);
  CHECK(ablated[1].content.find(kReasoningSlot) == std::string::npos);
}

TEST_CASE("template files must carry the interview slot") {
  CHECK_THROWS_AS(load_prompt_template("no slots here", PromptKind::items_reasoning, scl90()),
                  ValidationError);
  CHECK_THROWS_AS(load_prompt_template("just <Interview>", PromptKind::symptom_assessment, scl90()),
                  ValidationError);
  // the reasoning slot is client material; it cannot precede the interview
  CHECK_THROWS_AS(load_prompt_template("<Item-aware Reasoning Result>\nthen\n<Interview>",
                                       PromptKind::symptom_assessment, scl90()),
                  ValidationError);
}
