// Wire-level integration: the whole batch pipeline through the real HTTP
// adapter against a local OpenAI-compatible server, recording a cassette on
// the way, then replaying the cassette with the network gone.

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "ipaeval/runner.hpp"

using namespace ipaeval;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures{IPAEVAL_FIXTURE_DIR};

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ipaeval-integration-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string scores_for(const std::string& flattened) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& d : scl90().dimensions) scores[d.name] = -1;
  if (flattened.find("Client ID: C1") != std::string::npos) {
    scores["depression"] = 2;
    scores["anxiety"] = 1;
  } else if (flattened.find("Client ID: C2") != std::string::npos) {
    scores["somatization"] = 1;
  }
  return nlohmann::json{{"scores", scores}}.dump();
}

}  // namespace

TEST_CASE("cmd_assess runs over HTTP, records a cassette, and replays it offline") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    auto body = nlohmann::json::parse(req.body);
    std::string flattened;
    for (const auto& m : body["messages"]) flattened += m["content"].get<std::string>() + "\n";

    std::string content;
    if (flattened.find("Scoring criteria:") != std::string::npos) {
      content = scores_for(flattened);
    } else {
      content =
          R"({"items": [{"client_statement": "s", "symptom_category": "depression",
              "specific_symptom": "Feeling blue", "presence": true, "explanation": "stated"}]})";
    }
    nlohmann::json reply;
    reply["choices"][0]["message"]["content"] = content;
    res.set_content(reply.dump(), "application/json");
  });

  auto port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("IPAEVAL_BASE_URL", ("http://127.0.0.1:" + std::to_string(port) + "/v1").c_str(), 1);
  setenv("IPAEVAL_API_KEY", "integration-test", 1);

  auto cassette = fs::temp_directory_path() / "ipaeval-integration-cassette.jsonl";
  fs::remove(cassette);
  auto out_live = fresh_dir("live");
  auto corpus = load_corpus(kFixtures / "corpus4.jsonl");

  RunConfig live;
  live.provider = "custom";
  live.model = "fixture";
  live.cassette_file = cassette.string();
  live.runs = 1;
  live.concurrency = 3;  // exercise parallel calls against a real socket
  live.output_dir = out_live.string();
  auto recorded = cmd_assess(live, corpus);

  CHECK(recorded.assessments.size() == 4);
  CHECK(recorded.errors.empty());
  CHECK(hits.load() == 8);  // two stages per client
  for (const auto& record : recorded.assessments) {
    CHECK(record.reasoning.size() == 1);
    if (record.client_id == "C1") CHECK(psdi(record.scores).value == 1.5);
  }

  server.stop();
  server_thread.join();
  unsetenv("IPAEVAL_BASE_URL");
  unsetenv("IPAEVAL_API_KEY");

  // replay with the server gone: same records from the cassette alone
  auto out_replay = fresh_dir("replay");
  RunConfig replay;
  replay.provider = "cassette";
  replay.model = "fixture";
  replay.cassette_file = cassette.string();
  replay.runs = 1;
  replay.output_dir = out_replay.string();
  auto replayed = cmd_assess(replay, corpus);

  CHECK(hits.load() == 8);  // no further network traffic
  REQUIRE(replayed.assessments.size() == recorded.assessments.size());
  for (std::size_t i = 0; i < replayed.assessments.size(); ++i) {
    auto expected = recorded.assessments[i];
    expected.provider_model = replayed.assessments[i].provider_model;  // provider tag differs
    CHECK(replayed.assessments[i] == expected);
  }

  // replaying twice is byte-identical
  auto out_again = fresh_dir("replay-again");
  replay.output_dir = out_again.string();
  cmd_assess(replay, corpus);
  CHECK(detail::read_file(out_replay / "records.jsonl") ==
        detail::read_file(out_again / "records.jsonl"));
  fs::remove(cassette);
}
