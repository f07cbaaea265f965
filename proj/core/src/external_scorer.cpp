#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "citenav/errors.hpp"
#include "citenav/scorer_protocol.hpp"

namespace citenav {
namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags >= 0) ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

[[noreturn]] void unavailable(const std::string& what) { throw ScorerUnavailableError(what, {}); }

// Reads and writes newline-terminated records over a pair of descriptors
// (the same descriptor for sockets).
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, std::string description)
      : read_fd_(read_fd), write_fd_(write_fd), description_(std::move(description)) {
    set_nonblocking(read_fd_);
    if (write_fd_ != read_fd_) set_nonblocking(write_fd_);
  }

  ~FdChannel() override { close_fds(); }

  std::vector<std::string> exchange(std::span<const std::string> lines, std::size_t expected_replies,
                                    std::chrono::milliseconds timeout) override {
    if (read_fd_ < 0) unavailable(description_ + ": channel closed");
    std::string outgoing;
    for (const auto& line : lines) {
      outgoing.append(line);
      outgoing.push_back('\n');
    }
    std::size_t written = 0;
    std::string write_error;
    std::vector<std::string> replies;
    take_lines(replies, expected_replies);

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (written < outgoing.size() || replies.size() < expected_replies) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) unavailable(description_ + ": timed out waiting for the scorer");

      pollfd fds[2];
      nfds_t count = 0;
      const bool want_write = written < outgoing.size();
      if (read_fd_ == write_fd_) {
        fds[count++] = pollfd{read_fd_, static_cast<short>(POLLIN | (want_write ? POLLOUT : 0)), 0};
      } else {
        fds[count++] = pollfd{read_fd_, POLLIN, 0};
        if (want_write) fds[count++] = pollfd{write_fd_, POLLOUT, 0};
      }
      const int ready = ::poll(fds, count, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        unavailable(description_ + ": poll failed: " + std::strerror(errno));
      }
      if (ready == 0) continue;

      for (nfds_t i = 0; i < count; ++i) {
        const bool is_write_fd = fds[i].fd == write_fd_;
        if (want_write && is_write_fd && (fds[i].revents & (POLLOUT | POLLERR | POLLHUP))) {
          const ssize_t n = ::write(write_fd_, outgoing.data() + written, outgoing.size() - written);
          if (n < 0 && errno != EAGAIN && errno != EINTR) {
            // Keep reading: a refusing scorer explains itself before closing.
            write_error = description_ + ": scorer closed its input (" + std::strerror(errno) + ")";
            written = outgoing.size();
          }
          if (n > 0) written += static_cast<std::size_t>(n);
        }
        if (fds[i].fd == read_fd_ && (fds[i].revents & (POLLIN | POLLHUP | POLLERR))) {
          char chunk[8192];
          const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
          if (n == 0) unavailable(write_error.empty() ? description_ + ": scorer closed its output" : write_error);
          if (n < 0 && errno != EAGAIN && errno != EINTR) {
            unavailable(description_ + ": read failed (" + std::strerror(errno) + ")");
          }
          if (n > 0) {
            buffer_.append(chunk, static_cast<std::size_t>(n));
            take_lines(replies, expected_replies);
          }
        }
      }
    }
    return replies;
  }

  std::string describe() const override { return description_; }

 protected:
  void close_fds() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  void take_lines(std::vector<std::string>& replies, std::size_t expected) {
    std::size_t start = 0;
    while (replies.size() < expected) {
      const auto nl = buffer_.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = buffer_.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      start = nl + 1;
      if (!line.empty()) replies.push_back(std::move(line));
    }
    buffer_.erase(0, start);
  }

  int read_fd_;
  int write_fd_;
  std::string description_;
  std::string buffer_;
};

class ProcessChannel final : public FdChannel {
 public:
  ProcessChannel(int read_fd, int write_fd, pid_t pid, std::string description)
      : FdChannel(read_fd, write_fd, std::move(description)), pid_(pid) {}

  ~ProcessChannel() override {
    close_fds();  // EOF on stdin asks the scorer to exit
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
      ::usleep(10000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<LineChannel> spawn_process_channel(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ArgumentError("spawn_process_channel: empty command");
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) unavailable(std::string("pipe: ") + std::strerror(errno));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    unavailable(std::string("pipe: ") + std::strerror(errno));
  }

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) unavailable(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  std::string description = "cmd:";
  for (std::size_t i = argv.size() > 2 && argv[0] == "/bin/sh" ? 2 : 0; i < argv.size(); ++i) {
    if (description.size() > 4) description.push_back(' ');
    description += argv[i];
  }
  return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid, std::move(description));
}

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, int port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    unavailable("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = found; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) unavailable("cannot connect to " + host + ":" + service);
  return std::make_unique<FdChannel>(fd, fd, "external:" + host + ":" + service);
}

// ---------------------------------------------------------------------------

struct ExternalScorer::State {
  std::unique_ptr<LineChannel> channel;
  ExternalScorerOptions options;
  std::mutex mutex;
  bool broken = false;
};

ExternalScorer::ExternalScorer(std::unique_ptr<LineChannel> channel, ExternalScorerOptions options)
    : state_(std::make_unique<State>()) {
  if (!channel) throw ArgumentError("ExternalScorer: null channel");
  if (options.batch_size == 0) options.batch_size = 1;
  state_->channel = std::move(channel);
  state_->options = options;
  const std::vector<std::string> hello{handshake_line()};
  const auto reply = state_->channel->exchange(hello, 1, options.timeout);
  check_handshake(reply.at(0));
}

ExternalScorer::~ExternalScorer() = default;

std::string ExternalScorer::name() const { return state_->channel->describe(); }

std::vector<std::string> ExternalScorer::raw_exchange(std::span<const std::string> lines, std::size_t expected) {
  std::lock_guard lock(state_->mutex);
  return state_->channel->exchange(lines, expected, state_->options.timeout);
}

std::vector<double> ExternalScorer::score(std::span<const PairInput> pairs) {
  std::lock_guard lock(state_->mutex);
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (std::size_t begin = 0; begin < pairs.size(); begin += state_->options.batch_size) {
    const auto batch = pairs.subspan(begin, std::min(state_->options.batch_size, pairs.size() - begin));
    std::vector<std::string> ids;
    std::vector<std::string> lines;
    ids.reserve(batch.size());
    lines.reserve(batch.size());
    for (const auto& pair : batch) {
      ids.push_back(pair.pair_id);
      lines.push_back(encode_request(pair.pair_id, pair.query_text, pair.candidate_text));
    }
    if (state_->broken) throw ScorerUnavailableError(name() + ": scorer connection is broken", ids);

    std::vector<std::string> raw;
    try {
      raw = state_->channel->exchange(lines, lines.size(), state_->options.timeout);
    } catch (const ScorerUnavailableError& e) {
      state_->broken = true;
      throw ScorerUnavailableError(e.what(), ids);
    }
    std::vector<ScoreReply> replies;
    replies.reserve(raw.size());
    try {
      for (const auto& line : raw) replies.push_back(decode_reply(line));
      const auto aligned = align_replies(ids, replies);
      scores.insert(scores.end(), aligned.begin(), aligned.end());
    } catch (const ProtocolError&) {
      // The stream may be out of step now; refuse further batches.
      state_->broken = true;
      throw;
    }
  }
  return scores;
}

}  // namespace citenav
