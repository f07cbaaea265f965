// Deterministic scorer process speaking the citenav-scorer line protocol.
// Used by the test suites to exercise the external scorer path without a
// model. Serves stdin/stdout, or one TCP client at a time with --listen.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace {

using json = nlohmann::json;

struct StubOptions {
  std::string mode = "hash";  // hash | constant
  double constant = 0.5;
  long fail_after = -1;       // exit after this many requests
  long hang_after = -1;       // stop replying after this many requests
  bool refuse = false;        // refuse the handshake
  bool out_of_range = false;  // reply 1.5
  bool drop_ids = false;      // omit the id field
  bool ignore_version = false;
};

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double stub_score(const StubOptions& opt, const std::string& query, const std::string& candidate) {
  if (opt.mode == "constant") return opt.constant;
  const std::uint64_t h = fnv1a(candidate, fnv1a(query) ^ 0x9e3779b97f4a7c15ULL);
  return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

std::string reply_for(const StubOptions& opt, const std::string& line) {
  const auto req = json::parse(line, nullptr, false);
  json out;
  if (req.is_object() && req.contains("id")) out["id"] = req["id"];
  if (req.is_discarded() || !req.is_object()) {
    out["error"] = "request is not a JSON object";
    if (!out.contains("id")) out["id"] = "";
    return out.dump();
  }
  const auto q = req.find("query");
  const auto c = req.find("candidate");
  if (!req.contains("id") || !req["id"].is_string() || q == req.end() || !q->is_string() || c == req.end() ||
      !c->is_string()) {
    out["error"] = "request needs string fields id, query, candidate";
    if (!out.contains("id") || !out["id"].is_string()) out["id"] = "";
    return out.dump();
  }
  out["score"] = opt.out_of_range ? 1.5 : stub_score(opt, q->get<std::string>(), c->get<std::string>());
  if (opt.drop_ids) out.erase("id");
  return out.dump();
}

// Returns false once the stub decides to terminate.
bool serve(const StubOptions& opt, std::FILE* in, std::FILE* out) {
  if (opt.refuse) {
    std::fputs("{\"error\":\"model unavailable\"}\n", out);
    std::fflush(out);
    return false;
  }
  json hello{{"protocol", "citenav-scorer"}, {"version", opt.ignore_version ? 99 : 1}};
  std::fputs((hello.dump() + "\n").c_str(), out);
  std::fflush(out);

  long served = 0;
  bool greeted = false;  // the client's handshake is consumed, not scored
  std::string line;
  int ch = 0;
  while ((ch = std::fgetc(in)) != EOF) {
    if (ch != '\n') {
      line.push_back(static_cast<char>(ch));
      continue;
    }
    if (line.empty()) continue;
    if (!greeted) {
      greeted = true;
      const auto hello_in = json::parse(line, nullptr, false);
      if (hello_in.is_object() && hello_in.contains("protocol") && !hello_in.contains("id")) {
        line.clear();
        continue;
      }
    }
    if (opt.fail_after >= 0 && served >= opt.fail_after) std::_Exit(3);
    if (opt.hang_after >= 0 && served >= opt.hang_after) {
      line.clear();
      continue;
    }
    std::fputs((reply_for(opt, line) + "\n").c_str(), out);
    std::fflush(out);
    ++served;
    line.clear();
  }
  return true;
}

int listen_loop(const StubOptions& opt, int port) {
  const int server = ::socket(AF_INET, SOCK_STREAM, 0);
  if (server < 0) return 1;
  int yes = 1;
  ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(server, 8) != 0) {
    std::perror("stub scorer: bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(server, reinterpret_cast<sockaddr*>(&addr), &len);
  std::printf("listening %d\n", ntohs(addr.sin_port));
  std::fflush(stdout);
  for (;;) {
    const int client = ::accept(server, nullptr, nullptr);
    if (client < 0) continue;
    std::FILE* in = ::fdopen(client, "r");
    std::FILE* out = ::fdopen(::dup(client), "w");
    const bool keep_going = serve(opt, in, out);
    std::fclose(in);
    std::fclose(out);
    if (!keep_going) break;
  }
  ::close(server);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Deterministic citenav-scorer stub"};
  StubOptions opt;
  int port = -1;
  app.add_option("--mode", opt.mode, "hash or constant")->check(CLI::IsMember({"hash", "constant"}));
  app.add_option("--score", opt.constant, "score returned in constant mode")->check(CLI::Range(0.0, 1.0));
  app.add_option("--fail-after", opt.fail_after, "exit abruptly after N requests");
  app.add_option("--hang-after", opt.hang_after, "stop replying after N requests");
  app.add_flag("--refuse", opt.refuse, "refuse the handshake");
  app.add_flag("--out-of-range", opt.out_of_range, "reply with scores outside [0, 1]");
  app.add_flag("--drop-ids", opt.drop_ids, "omit ids from replies");
  app.add_flag("--bad-version", opt.ignore_version, "announce an unsupported protocol version");
  app.add_option("--listen", port, "serve TCP on 127.0.0.1:PORT (0 picks a free port)");
  CLI11_PARSE(app, argc, argv);

  if (port >= 0) return listen_loop(opt, port);
  serve(opt, stdin, stdout);
  return 0;
}
