#include "citenav/scorer_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "citenav/errors.hpp"

namespace citenav {

using json = nlohmann::json;

std::string handshake_line() {
  json j;
  j["protocol"] = kProtocolName;
  j["version"] = kProtocolVersion;
  return j.dump();
}

void check_handshake(std::string_view line) {
  const auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("handshake: not a JSON object: " + std::string(line));
  if (auto err = j.find("error"); err != j.end()) {
    throw ProtocolError("handshake refused by scorer: " + (err->is_string() ? err->get<std::string>() : err->dump()));
  }
  auto proto = j.find("protocol");
  auto version = j.find("version");
  if (proto == j.end() || !proto->is_string() || proto->get<std::string>() != kProtocolName) {
    throw ProtocolError("handshake: unexpected protocol in " + std::string(line));
  }
  if (version == j.end() || !version->is_number_integer() || version->get<int>() != kProtocolVersion) {
    throw ProtocolError("handshake: unsupported protocol version in " + std::string(line));
  }
}

std::string encode_request(std::string_view id, std::string_view query, std::string_view candidate) {
  json j;
  j["id"] = id;
  j["query"] = query;
  j["candidate"] = candidate;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

ScoreReply decode_reply(std::string_view line) {
  const auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("reply is not a JSON object: " + std::string(line));
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) throw ProtocolError("reply without a string id: " + std::string(line));
  ScoreReply reply;
  reply.id = id->get<std::string>();
  auto score = j.find("score");
  auto error = j.find("error");
  const bool has_score = score != j.end() && !score->is_null();
  const bool has_error = error != j.end() && !error->is_null();
  if (has_score == has_error) throw ProtocolError("reply must carry exactly one of score/error: " + std::string(line));
  if (has_error) {
    reply.error = error->is_string() ? error->get<std::string>() : error->dump();
    return reply;
  }
  if (!score->is_number()) throw ProtocolError("reply score is not a number: " + std::string(line));
  const double value = score->get<double>();
  if (!(value >= 0.0 && value <= 1.0)) throw ProtocolError("reply score outside [0, 1]: " + std::string(line));
  reply.score = value;
  return reply;
}

std::vector<double> align_replies(std::span<const std::string> request_ids, std::span<const ScoreReply> replies) {
  std::unordered_map<std::string_view, std::size_t> slot;
  for (std::size_t i = 0; i < request_ids.size(); ++i) {
    if (!slot.emplace(request_ids[i], i).second) throw ArgumentError("duplicate request id '" + request_ids[i] + "'");
  }
  std::vector<double> scores(request_ids.size(), 0.0);
  std::vector<char> filled(request_ids.size(), 0);
  for (const auto& reply : replies) {
    auto it = slot.find(reply.id);
    if (it == slot.end()) throw ProtocolError("reply with unmatched id '" + reply.id + "'");
    if (filled[it->second]) throw ProtocolError("duplicate reply for id '" + reply.id + "'");
    if (reply.error) throw ProtocolError("scorer failed on '" + reply.id + "': " + *reply.error);
    scores[it->second] = *reply.score;
    filled[it->second] = 1;
  }
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!filled[i]) throw ProtocolError("no reply for id '" + request_ids[i] + "'");
  }
  return scores;
}

namespace {

std::string_view after_prefix(std::string_view s, std::string_view prefix) {
  return s.starts_with(prefix) ? s.substr(prefix.size()) : std::string_view{};
}

std::unique_ptr<LineChannel> open_channel(const std::string& endpoint) {
  if (auto cmd = after_prefix(endpoint, "cmd:"); !cmd.empty()) {
    return spawn_process_channel({"/bin/sh", "-c", std::string(cmd)});
  }
  if (auto addr = after_prefix(endpoint, "external:"); !addr.empty()) {
    const auto colon = addr.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == addr.size()) {
      throw ArgumentError("scorer endpoint '" + endpoint + "': expected external:<host>:<port>");
    }
    int port = 0;
    try {
      port = std::stoi(std::string(addr.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ArgumentError("scorer endpoint '" + endpoint + "': bad port");
    }
    return connect_tcp_channel(std::string(addr.substr(0, colon)), port);
  }
  throw ArgumentError("unknown external scorer endpoint '" + endpoint + "' (use cmd:<command> or external:<host>:<port>)");
}

}  // namespace

std::unique_ptr<Scorer> make_scorer(const std::string& endpoint, const InvertedIndex* index,
                                    ExternalScorerOptions options) {
  if (endpoint == "identity") return std::make_unique<IdentityScorer>();
  if (auto path = after_prefix(endpoint, "lexical:"); !path.empty()) {
    if (!index) throw ArgumentError("the lexical scorer needs an index");
    return std::make_unique<LexicalScorer>(LexicalModel::load(std::string(path)), *index);
  }
  return std::make_unique<ExternalScorer>(open_channel(endpoint), options);
}

// ---------------------------------------------------------------------------
// Conformance suite

namespace {

std::vector<ScoreReply> decode_all(const std::vector<std::string>& lines) {
  std::vector<ScoreReply> out;
  out.reserve(lines.size());
  for (const auto& line : lines) out.push_back(decode_reply(line));
  return out;
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(const std::string& endpoint, ExternalScorerOptions options) {
  std::vector<ConformanceCheck> checks;
  auto record = [&](const std::string& name, auto&& body) {
    ConformanceCheck check{name, false, ""};
    try {
      check.detail = body();
      check.passed = true;
    } catch (const std::exception& e) {
      check.detail = e.what();
    }
    checks.push_back(std::move(check));
    return checks.back().passed;
  };

  std::unique_ptr<LineChannel> channel;
  const bool connected = record("connect", [&] {
    channel = open_channel(endpoint);
    return channel->describe();
  });
  const bool handshaken = connected && record("handshake", [&] {
    const std::vector<std::string> hello{handshake_line()};
    const auto reply = channel->exchange(hello, 1, options.timeout);
    check_handshake(reply.at(0));
    return reply.at(0);
  });
  if (!handshaken) {
    for (const char* name : {"id_round_trip", "score_range", "reply_alignment", "repeatable", "unknown_fields",
                             "malformed_request"}) {
      checks.push_back({name, false, "skipped: no handshake"});
    }
    return checks;
  }

  const std::vector<std::string> ids{"conf-1", "conf-2", "conf-3"};
  const std::vector<std::string> batch{
      encode_request(ids[0], "graph neural networks for citation recommendation", "citation graph navigation"),
      encode_request(ids[1], "graph neural networks for citation recommendation", "protein folding dynamics"),
      encode_request(ids[2], "graph neural networks for citation recommendation", ""),
  };
  std::vector<std::string> first_raw;
  std::vector<double> first_scores;

  record("id_round_trip", [&] {
    first_raw = channel->exchange(batch, batch.size(), options.timeout);
    std::vector<std::string> got;
    for (const auto& line : first_raw) {
      const auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("id") || !j["id"].is_string()) throw ProtocolError("reply without id: " + line);
      got.push_back(j["id"].get<std::string>());
    }
    std::sort(got.begin(), got.end());
    if (got != ids) throw ProtocolError("reply ids do not match request ids");
    return std::string("3 of 3 ids returned");
  });
  record("score_range", [&] {
    if (first_raw.size() != batch.size()) throw ProtocolError("no replies to check");
    for (const auto& reply : decode_all(first_raw)) {
      if (!reply.score) throw ProtocolError("error reply for well-formed request '" + reply.id + "'");
    }
    return std::string("all scores in [0, 1]");
  });
  record("reply_alignment", [&] {
    first_scores = align_replies(ids, decode_all(first_raw));
    return std::string("replies align with requests");
  });
  record("repeatable", [&] {
    const auto again = align_replies(ids, decode_all(channel->exchange(batch, batch.size(), options.timeout)));
    if (again != first_scores) throw ProtocolError("identical requests produced different scores");
    return std::string("identical requests, identical scores");
  });
  record("unknown_fields", [&] {
    const std::vector<std::string> extra{
        R"({"id":"conf-extra","query":"a","candidate":"b","unexpected_field":{"nested":true}})"};
    const auto reply = decode_reply(channel->exchange(extra, 1, options.timeout).at(0));
    if (reply.id != "conf-extra" || !reply.score) throw ProtocolError("request with an extra field was not scored");
    return std::string("extra request fields ignored");
  });
  record("malformed_request", [&] {
    const std::vector<std::string> bad{R"({"id":"conf-bad","query":42})"};
    const auto reply = decode_reply(channel->exchange(bad, 1, options.timeout).at(0));
    if (reply.id != "conf-bad" || !reply.error) throw ProtocolError("malformed request did not produce an error reply");
    return "error reply: " + *reply.error;
  });
  return checks;
}

}  // namespace citenav
