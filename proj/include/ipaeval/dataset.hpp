#pragma once

// Transcript ingestion, session filtering, corpus statistics, and
// phase-pair construction. Two transcript formats are supported:
//
//   speaker_lines       "Therapist: ..." / "Client: ..." lines
//   structured_records  JSON {id, turns:[{speaker,text}], phase?, language?}
//
// A corpus file is a JSON array or JSONL stream of structured records; a
// corpus directory mixes .txt (speaker lines) and .json (structured) files.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ipaeval/core.hpp"
#include "ipaeval/decode.hpp"
#include "ipaeval/gateway.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

enum class TranscriptFormat { speaker_lines, structured_records };
enum class Tokenizer { whitespace, cjk_chars };

inline std::optional<Tokenizer> tokenizer_from_string(std::string_view s) {
  auto key = detail::normalize_key(s);
  if (key == "whitespace") return Tokenizer::whitespace;
  if (key == "cjk_chars") return Tokenizer::cjk_chars;
  return std::nullopt;
}

struct ParseOptions {
  std::string id = "session";
  std::string language = "en";
  // Extra label -> speaker mappings for localized transcripts. Strict mode is
  // the default: only "Therapist"/"Client" (case-insensitive) are accepted.
  std::map<std::string, Speaker> speaker_aliases;
};

/// Aliases for the Chinese counseling corpora.
inline std::map<std::string, Speaker> chinese_speaker_aliases() {
  return {{"咨询师", Speaker::therapist},
          {"心理咨询师", Speaker::therapist},
          {"来访者", Speaker::client},
          {"求助者", Speaker::client}};
}

/// Parse one transcript into a Session. Blank lines are skipped; an unknown
/// speaker label or an empty transcript is an error.
inline Session parse_transcript(std::string_view content, TranscriptFormat format,
                                const ParseOptions& options = {}) {
  if (format == TranscriptFormat::structured_records) {
    auto j = nlohmann::json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ParseError("structured record is not a JSON object");
    Session session;
    try {
      session = j.get<Session>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad structured record: ") + e.what());
    }
    if (session.turns.empty()) throw ParseError("empty transcript: " + session.id);
    validate(session);
    return session;
  }

  Session session;
  session.id = options.id;
  session.language = options.language;
  for (auto raw_line : detail::split_lines(content)) {
    auto line = detail::trim(raw_line);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw ParseError("line has no speaker label: " + std::string(line.substr(0, 60)));
    auto label = line.substr(0, colon);
    auto text = detail::trim(line.substr(colon + 1));
    std::optional<Speaker> speaker = speaker_from_string(label);
    if (!speaker) {
      auto it = options.speaker_aliases.find(std::string(detail::trim(label)));
      if (it != options.speaker_aliases.end()) speaker = it->second;
    }
    if (!speaker) throw ParseError("unknown speaker label: " + std::string(label));
    if (text.empty()) throw ParseError("empty utterance for speaker: " + std::string(label));
    session.turns.push_back(Turn{*speaker, std::string(text)});
  }
  if (session.turns.empty()) throw ParseError("empty transcript: " + session.id);
  return session;
}

/// Exact-text fingerprint of a session: a hash over the concatenated turn
/// texts. Speaker labels and ids do not contribute, so the same dialogue
/// ingested from two corpora collides.
inline std::string session_fingerprint(const Session& session) {
  std::string canon;
  for (const auto& t : session.turns) {
    canon += t.text;
    canon += '\x1e';
  }
  return detail::to_hex(detail::fnv1a64(canon));
}

/// Drop sessions whose transcript text duplicates an earlier one. First
/// occurrence wins, so load the preferred corpus first when merging sources.
inline std::vector<Session> dedupe_sessions(const std::vector<Session>& sessions) {
  std::set<std::string> seen;
  std::vector<Session> kept;
  for (const auto& s : sessions) {
    if (seen.insert(session_fingerprint(s)).second) kept.push_back(s);
  }
  return kept;
}

/// Retain sessions whose turn count lies in [min_turns, max_turns]. Stable
/// order; idempotent.
inline std::vector<Session> filter_sessions(const std::vector<Session>& sessions, int min_turns,
                                            int max_turns) {
  if (min_turns < 0 || max_turns < min_turns)
    throw ValidationError("invalid turn bounds: [" + std::to_string(min_turns) + ", " +
                          std::to_string(max_turns) + "]");
  std::vector<Session> kept;
  for (const auto& s : sessions) {
    auto n = static_cast<int>(s.turns.size());
    if (n >= min_turns && n <= max_turns) kept.push_back(s);
  }
  return kept;
}

/// A phase pair reference: both sessions belong to one client and must be
/// present in the corpus.
struct PairRef {
  std::string client_id;
  std::string initial_session_id;
  std::string full_session_id;

  bool operator==(const PairRef&) const = default;
};

inline void to_json(nlohmann::json& j, const PairRef& p) {
  j = nlohmann::json{{"client_id", p.client_id},
                     {"initial_session_id", p.initial_session_id},
                     {"full_session_id", p.full_session_id}};
}

inline void from_json(const nlohmann::json& j, PairRef& p) {
  p.client_id = j.at("client_id").get<std::string>();
  p.initial_session_id = j.at("initial_session_id").get<std::string>();
  p.full_session_id = j.at("full_session_id").get<std::string>();
}

struct Corpus {
  std::string name;
  std::vector<Session> sessions;
  std::vector<PairRef> pairs;                          // optional
  std::map<std::string, std::string> client_by_session;  // optional session -> client

  const Session* find_session(std::string_view id) const {
    for (const auto& s : sessions) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  /// Client id of a session: the explicit mapping when present, else the
  /// session stands for its own client.
  std::string client_of(const std::string& session_id) const {
    auto it = client_by_session.find(session_id);
    return it == client_by_session.end() ? session_id : it->second;
  }
};

struct DatasetStats {
  std::size_t n_clients = 0;
  std::size_t n_sessions = 0;
  double avg_utterances = 0.0;
  double std_utterances = 0.0;
  double avg_words_per_utterance = 0.0;
  double std_words_per_utterance = 0.0;
};

inline void to_json(nlohmann::json& j, const DatasetStats& s) {
  j = nlohmann::json{{"n_clients", s.n_clients},
                     {"n_sessions", s.n_sessions},
                     {"avg_utterances", s.avg_utterances},
                     {"std_utterances", s.std_utterances},
                     {"avg_words_per_utterance", s.avg_words_per_utterance},
                     {"std_words_per_utterance", s.std_words_per_utterance}};
}

/// Token count of one utterance. `whitespace` counts space-delimited tokens;
/// `cjk_chars` counts non-whitespace code points, the convention that makes
/// per-utterance counts meaningful for unsegmented CJK text.
inline std::size_t token_count(std::string_view text, Tokenizer tokenizer) {
  if (tokenizer == Tokenizer::whitespace) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
      bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
      if (!ws && !in_token) ++count;
      in_token = !ws;
    }
    return count;
  }
  // Count code points, skipping ASCII whitespace and the ideographic space.
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size();) {
    unsigned char lead = static_cast<unsigned char>(text[i]);
    std::size_t len = lead < 0x80 ? 1 : lead < 0xE0 ? 2 : lead < 0xF0 ? 3 : 4;
    if (lead >= 0x80 && lead < 0xC0) len = 1;  // stray continuation byte
    len = std::min(len, text.size() - i);
    bool ws = false;
    if (len == 1) {
      char c = text[i];
      ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    } else if (len == 3) {
      ws = text.substr(i, 3) == "\xE3\x80\x80";  // U+3000
    }
    if (!ws) ++count;
    i += len;
  }
  return count;
}

/// Utterance counts aggregated over sessions and token counts aggregated over
/// all utterances, both as mean and population standard deviation.
inline DatasetStats corpus_stats(const Corpus& corpus, Tokenizer tokenizer) {
  if (corpus.sessions.empty()) throw ValidationError("corpus has no sessions");

  DatasetStats stats;
  stats.n_sessions = corpus.sessions.size();
  if (!corpus.pairs.empty()) {
    std::set<std::string> clients;
    for (const auto& p : corpus.pairs) clients.insert(p.client_id);
    stats.n_clients = clients.size();
  } else {
    stats.n_clients = corpus.sessions.size();
  }

  std::vector<double> utterances;
  std::vector<double> tokens;
  for (const auto& s : corpus.sessions) {
    utterances.push_back(static_cast<double>(s.turns.size()));
    for (const auto& t : s.turns)
      tokens.push_back(static_cast<double>(token_count(t.text, tokenizer)));
  }
  auto mean_std = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    double mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::pair<double, double>{mean, std::sqrt(var / static_cast<double>(xs.size()))};
  };
  std::tie(stats.avg_utterances, stats.std_utterances) = mean_std(utterances);
  std::tie(stats.avg_words_per_utterance, stats.std_words_per_utterance) = mean_std(tokens);
  return stats;
}

struct IngestionError {
  std::string source;
  std::string detail;
};

struct LoadedCorpus {
  Corpus corpus;
  std::vector<IngestionError> errors;
};

namespace detail {

inline void ingest_record(Corpus& corpus, std::vector<IngestionError>& errors,
                          const nlohmann::json& j, const std::string& source) {
  try {
    auto session = parse_transcript(j.dump(), TranscriptFormat::structured_records);
    if (corpus.find_session(session.id))
      throw ParseError("duplicate session id: " + session.id);
    if (j.contains("client_id") && j["client_id"].is_string())
      corpus.client_by_session[session.id] = j["client_id"].get<std::string>();
    corpus.sessions.push_back(std::move(session));
  } catch (const Error& e) {
    errors.push_back({source, e.what()});
  }
}

}  // namespace detail

/// Load a corpus from a structured-records file (JSON array or JSONL) or a
/// directory of transcripts. Malformed entries become ingestion errors; they
/// never abort the load.
inline LoadedCorpus load_corpus(const std::filesystem::path& path) {
  LoadedCorpus out;
  out.corpus.name = path.filename().string();

  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      auto ext = file.extension().string();
      try {
        if (ext == ".txt") {
          ParseOptions options;
          options.id = file.stem().string();
          out.corpus.sessions.push_back(
              parse_transcript(detail::read_file(file), TranscriptFormat::speaker_lines, options));
        } else if (ext == ".json" || ext == ".jsonl") {
          auto content = detail::read_file(file);
          auto j = nlohmann::json::parse(content, nullptr, false);
          if (j.is_discarded()) throw ParseError("not valid JSON: " + file.string());
          detail::ingest_record(out.corpus, out.errors, j, file.filename().string());
        }
      } catch (const Error& e) {
        out.errors.push_back({file.filename().string(), e.what()});
      }
    }
    return out;
  }

  auto content = detail::read_file(path);
  auto trimmed = detail::trim(content);
  if (trimmed.empty()) throw ParseError("corpus file is empty: " + path.string());
  if (trimmed.front() == '[') {
    auto j = nlohmann::json::parse(trimmed, nullptr, false);
    if (j.is_discarded() || !j.is_array())
      throw ParseError("corpus file is not a JSON array: " + path.string());
    std::size_t index = 0;
    for (const auto& rec : j)
      detail::ingest_record(out.corpus, out.errors, rec, "record " + std::to_string(index++));
  } else {
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(content)) {
      ++line_no;
      auto t = detail::trim(line);
      if (t.empty()) continue;
      auto j = nlohmann::json::parse(t, nullptr, false);
      if (j.is_discarded()) {
        out.errors.push_back({"line " + std::to_string(line_no), "not valid JSON"});
        continue;
      }
      detail::ingest_record(out.corpus, out.errors, j, "line " + std::to_string(line_no));
    }
  }
  return out;
}

/// Load a pair corpus: a sessions file plus a pairs file of
/// {client_id, initial_session_id, full_session_id} records. Pairs that
/// reference missing sessions become ingestion errors.
inline LoadedCorpus load_pair_corpus(const std::filesystem::path& sessions_path,
                                     const std::filesystem::path& pairs_path) {
  auto out = load_corpus(sessions_path);
  auto content = detail::read_file(pairs_path);
  auto parse_pair = [&](const nlohmann::json& j, const std::string& source) {
    try {
      auto pair = j.get<PairRef>();
      if (!out.corpus.find_session(pair.initial_session_id))
        throw ParseError("pair references missing session: " + pair.initial_session_id);
      if (!out.corpus.find_session(pair.full_session_id))
        throw ParseError("pair references missing session: " + pair.full_session_id);
      out.corpus.pairs.push_back(std::move(pair));
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({source, std::string("bad pair record: ") + e.what()});
    } catch (const Error& e) {
      out.errors.push_back({source, e.what()});
    }
  };
  auto trimmed = detail::trim(content);
  if (!trimmed.empty() && trimmed.front() == '[') {
    auto j = nlohmann::json::parse(trimmed, nullptr, false);
    if (j.is_discarded()) throw ParseError("pairs file is not valid JSON: " + pairs_path.string());
    std::size_t index = 0;
    for (const auto& rec : j) parse_pair(rec, "pair " + std::to_string(index++));
  } else {
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(content)) {
      ++line_no;
      auto t = detail::trim(line);
      if (t.empty()) continue;
      auto j = nlohmann::json::parse(t, nullptr, false);
      if (j.is_discarded()) {
        out.errors.push_back({"pair line " + std::to_string(line_no), "not valid JSON"});
        continue;
      }
      parse_pair(j, "pair line " + std::to_string(line_no));
    }
  }
  return out;
}

// --- Phase-pair construction ---

/// A worked example shown to the model: an initial-stage session that is a
/// prefix of its full session.
struct PhasePairExample {
  Session initial;
  Session full;
};

struct PhasePair {
  Session initial;
  Session full;
};

struct PhasePairConfig {
  std::string model;
  double temperature = 0.0;
  int max_output_tokens = 256;
  RetryPolicy retry{};
};

/// Carrier for a decode failure inside throwing call paths.
class FormatDecodeError : public Error {
 public:
  explicit FormatDecodeError(FormatError error)
      : Error(std::string(to_string(error.kind)) + ": " + error.detail), error(std::move(error)) {}

  FormatError error;
};

namespace detail {

inline std::string numbered_transcript(const Session& session) {
  std::string out;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1);
    out += ". ";
    out += speaker_label(session.turns[i].speaker);
    out += ": ";
    out += session.turns[i].text;
  }
  return out;
}

}  // namespace detail

/// Few-shot prompt asking the model to name the turn span of the
/// initial-stage portion of `full`. The span contract (turn indices, not
/// regenerated text) guarantees the extracted session is verbatim source
/// material.
inline std::string build_phase_prompt(const Session& full,
                                      const std::vector<PhasePairExample>& exemplars) {
  if (exemplars.empty()) throw ValidationError("phase extraction needs at least one exemplar");
  std::string prompt =
      "You segment counseling-session transcripts by treatment phase. Given the numbered "
      "transcript of a client's full counseling engagement, identify the initial-stage portion: "
      "the contiguous opening turns in which the client's situation and presenting concerns are "
      "established, before later-stage therapeutic work and change become the focus.\n\n"
      "Study the examples, then answer for the final transcript.\n";
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const auto& ex = exemplars[i];
    if (ex.initial.turns.size() >= ex.full.turns.size())
      throw ValidationError("exemplar initial session is not a proper prefix of its full session");
    prompt += "\nExample " + std::to_string(i + 1) + ":\n";
    prompt += detail::numbered_transcript(ex.full);
    prompt += "\nInitial stage span: {\"start_turn\": 1, \"end_turn\": " +
              std::to_string(ex.initial.turns.size()) + "}\n";
  }
  prompt += "\nTranscript:\n";
  prompt += detail::numbered_transcript(full);
  prompt +=
      "\n\nReturn only a JSON object of the form {\"start_turn\": 1, \"end_turn\": <last turn of "
      "the initial stage>} using the 1-based turn numbers shown in the transcript.";
  return prompt;
}

/// Ask the provider for the initial-stage span of `full` and validate that it
/// is a proper, prefix-contiguous slice. Throws FormatDecodeError when the
/// response does not decode and NonPrefixError when the span is not an
/// initial contiguous slice.
inline PhasePair build_phase_pair(const Session& full,
                                  const std::vector<PhasePairExample>& exemplars,
                                  Provider& provider, const PhasePairConfig& config) {
  validate(full);
  CompletionRequest request;
  request.messages = {Message{MessageRole::user, build_phase_prompt(full, exemplars)}};
  request.model = config.model;
  request.temperature = config.temperature;
  request.max_output_tokens = config.max_output_tokens;
  auto response = complete_with_retry(provider, request, config.retry);

  auto raw = response.raw_text;
  if (detail::trim(raw).empty())
    throw FormatDecodeError(
        detail::make_error(FormatErrorKind::empty_response, "provider returned an empty response", raw));
  auto parsed = detail::parse_candidate(raw);
  if (!parsed)
    throw FormatDecodeError(
        detail::make_error(FormatErrorKind::not_structured, "no JSON value found in output", raw));
  if (!parsed->is_object() || !parsed->contains("start_turn") || !parsed->contains("end_turn"))
    throw FormatDecodeError(detail::make_error(FormatErrorKind::schema_violation,
                                               "span object needs start_turn and end_turn", raw));
  auto start = detail::coerce_score((*parsed)["start_turn"]);
  auto end = detail::coerce_score((*parsed)["end_turn"]);
  if (!start || !end)
    throw FormatDecodeError(detail::make_error(FormatErrorKind::schema_violation,
                                               "span bounds are not integers", raw));

  auto n = static_cast<int>(full.turns.size());
  if (*start != 1)
    throw NonPrefixError("extracted span starts at turn " + std::to_string(*start) +
                         ", not at the beginning");
  if (*end < *start || *end >= n)
    throw NonPrefixError("extracted span [" + std::to_string(*start) + ", " + std::to_string(*end) +
                         "] is not a proper prefix of " + std::to_string(n) + " turns");

  PhasePair pair;
  pair.initial = full;
  pair.initial.id = full.id + ".initial";
  pair.initial.turns.assign(full.turns.begin(), full.turns.begin() + *end);
  pair.initial.phase = SessionPhase::initial;
  pair.full = full;
  pair.full.phase = SessionPhase::final;
  return pair;
}

}  // namespace ipaeval
