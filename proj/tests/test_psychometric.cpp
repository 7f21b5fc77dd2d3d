#include <doctest.h>

#include <filesystem>

#include "ipaeval/psychometric.hpp"
#include "ipaeval/util.hpp"

using namespace ipaeval;

TEST_CASE("bundled SCL-90 has the ten standard dimensions and 90 items") {
  const auto& test = scl90();
  CHECK(test.name == "SCL-90");
  REQUIRE(test.dimensions.size() == 10);

  std::vector<std::string> expected{
      "somatization",       "obsessive-compulsive", "interpersonal sensitivity",
      "depression",         "anxiety",              "hostility",
      "phobic anxiety",     "paranoid ideation",    "psychoticism",
      "additional items"};
  CHECK(test.dimension_names() == expected);

  std::size_t items = 0;
  for (const auto& d : test.dimensions) items += d.item_descriptions.size();
  CHECK(items == 90);
}

TEST_CASE("bundled test round-trips through serialize/load") {
  auto text = serialize_test(scl90());
  auto reloaded = load_test(text);
  CHECK(reloaded == scl90());
  // and the shipped data file matches the bundled definition
  auto from_file = load_test(detail::read_file(std::filesystem::path(IPAEVAL_DATA_DIR) /
                                               "tests" / "scl90.json"));
  CHECK(from_file == scl90());
}

TEST_CASE("load_test rejects bad definitions") {
  CHECK_THROWS_AS(load_test("not json at all"), ParseError);
  CHECK_THROWS_AS(load_test(R"({"name": "t"})"), ParseError);
  CHECK_THROWS_AS(load_test(R"({"name": "t", "dimensions": []})"), ValidationError);
  CHECK_THROWS_AS(
      load_test(R"({"name": "t", "dimensions": [{"name": "a"}, {"name": "A "}]})"),
      ValidationError);
  CHECK_THROWS_AS(load_test(R"({"name": "t", "dimensions": [{"description": "x"}]})"), ParseError);
}

TEST_CASE("load_test accepts a minimal simplified test") {
  auto test = load_test(R"({"name": "mini", "dimensions": [{"name": "mood"}, {"name": "sleep"}]})");
  CHECK(test.dimensions.size() == 2);
  CHECK(test.dimensions[0].item_descriptions.empty());
}

TEST_CASE("the shipped simplified variant loads without code changes") {
  auto test = load_test(detail::read_file(std::filesystem::path(IPAEVAL_DATA_DIR) / "tests" /
                                          "bsi_simplified.json"));
  CHECK(test.dimensions.size() == 9);
  for (const auto& d : test.dimensions) CHECK(d.item_descriptions.empty());
  CHECK(test.find_dimension("Hostility") != nullptr);
}

TEST_CASE("validate_score accepts exactly the bundled levels") {
  const auto& criteria = default_score_criteria();
  CHECK(validate_score(-1, criteria));
  CHECK(validate_score(0, criteria));
  CHECK(validate_score(1, criteria));
  CHECK(validate_score(2, criteria));
  CHECK(!validate_score(3, criteria));
  CHECK(!validate_score(-2, criteria));
  int valid = 0;
  for (int s = -10; s <= 10; ++s) {
    if (validate_score(s, criteria)) ++valid;
  }
  CHECK(valid == 4);
}

TEST_CASE("bundled criteria carry the published level descriptions") {
  const auto& criteria = default_score_criteria();
  REQUIRE(criteria.levels.size() == 4);
  CHECK(criteria.levels.at(-1) == "Symptom not addressed.");
  CHECK(criteria.levels.at(0) ==
        "Symptom addressed, but no symptoms found; no signs of distress or dysfunction.");
}

TEST_CASE("dimension lookup is case-insensitive") {
  const auto& test = scl90();
  REQUIRE(test.find_dimension("Interpersonal Sensitivity") != nullptr);
  CHECK(test.find_dimension("Interpersonal Sensitivity")->name == "interpersonal sensitivity");
  CHECK(test.find_dimension(" DEPRESSION ") != nullptr);
  CHECK(test.find_dimension("Sleepiness") == nullptr);
}

TEST_CASE("fallback_scores covers every dimension with -1") {
  auto scores = fallback_scores(scl90());
  CHECK(scores.by_dimension.size() == 10);
  for (const auto& [name, score] : scores.by_dimension) CHECK(score == -1);
  CHECK_NOTHROW(validate_scores(scores, scl90(), default_score_criteria()));
}

TEST_CASE("validate_scores rejects incomplete or invalid maps") {
  auto scores = fallback_scores(scl90());
  scores.by_dimension.erase("depression");
  CHECK_THROWS_AS(validate_scores(scores, scl90(), default_score_criteria()), ValidationError);

  auto bad = fallback_scores(scl90());
  bad.by_dimension["depression"] = 3;
  CHECK_THROWS_AS(validate_scores(bad, scl90(), default_score_criteria()), ValidationError);
}

TEST_CASE("render_score_criteria lists every level once") {
  auto block = render_score_criteria(default_score_criteria());
  CHECK(block.rfind("Scoring criteria: ", 0) == 0);
  CHECK(detail::count_occurrences(block, "-1 (") == 1);
  CHECK(detail::count_occurrences(block, "0 (") == 1);
  CHECK(detail::count_occurrences(block, " 1 (") == 1);
  CHECK(detail::count_occurrences(block, "2 (") == 1);
}

TEST_CASE("render_test mentions every dimension and keeps item lists") {
  auto text = render_test(scl90());
  for (const auto& d : scl90().dimensions) {
    CHECK(text.find(d.name) != std::string::npos);
  }
  CHECK(text.find("Feeling others do not understand you or are unsympathetic") !=
        std::string::npos);
}
