#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "citenav/rerank.hpp"

namespace citenav {

// Line-delimited JSON protocol spoken with external scorer processes.
//
//   handshake (both directions): {"protocol":"citenav-scorer","version":1}
//   request:                     {"id":..., "query":..., "candidate":...}
//   response:                    {"id":..., "score":p}   p in [0, 1]
//                           or   {"id":..., "error":"message"}
//
// Unknown fields are ignored. One response line per request line.

inline constexpr std::string_view kProtocolName = "citenav-scorer";
inline constexpr int kProtocolVersion = 1;

std::string handshake_line();

/// Throws ProtocolError unless `line` is a matching handshake. A handshake
/// carrying an "error" field (adapter failed to start) is reported as such.
void check_handshake(std::string_view line);

std::string encode_request(std::string_view id, std::string_view query, std::string_view candidate);

struct ScoreReply {
  std::string id;
  std::optional<double> score;
  std::optional<std::string> error;
};

/// Throws ProtocolError on invalid JSON, a missing id, neither/both of
/// score/error, a non-numeric score or a score outside [0, 1].
ScoreReply decode_reply(std::string_view line);

/// Aligns replies with request ids. Throws ProtocolError on an unknown or
/// repeated id, a missing reply, or an error reply.
std::vector<double> align_replies(std::span<const std::string> request_ids,
                                  std::span<const ScoreReply> replies);

/// Bidirectional line transport to a scorer (child-process pipes or TCP).
class LineChannel {
 public:
  virtual ~LineChannel() = default;

  /// Writes all `lines` while concurrently collecting replies, then keeps
  /// reading until `expected_replies` lines have arrived. Throws
  /// ScorerUnavailableError on EOF, I/O failure or timeout.
  virtual std::vector<std::string> exchange(std::span<const std::string> lines,
                                            std::size_t expected_replies,
                                            std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

/// Spawns `argv` with its stdin/stdout connected to the returned channel.
std::unique_ptr<LineChannel> spawn_process_channel(const std::vector<std::string>& argv);

/// Connects to host:port over TCP.
std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, int port);

struct ExternalScorerOptions {
  std::chrono::milliseconds timeout{30000};
  std::size_t batch_size = 256;
};

/// Scorer backed by an external process. Batches are serialized on one
/// connection; concurrent callers wait their turn.
class ExternalScorer final : public Scorer {
 public:
  /// Performs the handshake; throws ScorerUnavailableError/ProtocolError.
  ExternalScorer(std::unique_ptr<LineChannel> channel, ExternalScorerOptions options = {});
  ~ExternalScorer() override;

  std::vector<double> score(std::span<const PairInput> pairs) override;
  std::string name() const override;

  /// Sends raw lines and returns raw replies; used by the conformance suite.
  std::vector<std::string> raw_exchange(std::span<const std::string> lines, std::size_t expected);

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// Parses a scorer endpoint:
///   "identity"
///   "lexical:<model.json>"         (needs the index)
///   "external:<host>:<port>"       TCP
///   "cmd:<shell command>"          child process over stdio
std::unique_ptr<Scorer> make_scorer(const std::string& endpoint, const InvertedIndex* index,
                                    ExternalScorerOptions options = {});

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Exercises an external scorer endpoint: handshake, id round-trip, order
/// independence, score range, malformed-request error replies.
std::vector<ConformanceCheck> run_conformance(const std::string& endpoint,
                                              ExternalScorerOptions options = {});

}  // namespace citenav
