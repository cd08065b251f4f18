#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "maskmesh/protocol.hpp"

namespace maskmesh::protocol {

/// A connection to one backend: sends one request line, returns one response line.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::string exchange(const std::string& request_line) = 0;
};

/// Raised by server handlers; becomes an `error` response with this code.
class RequestFailure : public std::runtime_error {
 public:
  RequestFailure(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Backend side of the protocol. Subclasses implement dispatch(); handle_line()
/// turns every failure into an `error` response and never throws.
class MessageServer {
 public:
  virtual ~MessageServer() = default;

  std::string handle_line(std::string_view line);

 protected:
  virtual Envelope dispatch(const Envelope& request) = 0;

 private:
  std::mutex mutex_;
};

/// In-process transport. Requests still cross the full encode/decode path.
class LoopbackChannel : public Channel {
 public:
  explicit LoopbackChannel(std::shared_ptr<MessageServer> server) : server_(std::move(server)) {}
  std::string exchange(const std::string& request_line) override;

 private:
  std::shared_ptr<MessageServer> server_;
};

/// Records every request and response line passing through another channel.
class RecordingChannel : public Channel {
 public:
  using Transcript = std::vector<std::string>;

  RecordingChannel(std::unique_ptr<Channel> inner, std::shared_ptr<Transcript> transcript)
      : inner_(std::move(inner)), transcript_(std::move(transcript)) {}
  std::string exchange(const std::string& request_line) override;

 private:
  std::unique_ptr<Channel> inner_;
  std::shared_ptr<Transcript> transcript_;
};

/// Newline-delimited JSON over a child process's stdin/stdout.
class SubprocessChannel : public Channel {
 public:
  /// Runs `command` through /bin/sh. Throws BackendUnavailable when it cannot start.
  explicit SubprocessChannel(const std::string& command);
  ~SubprocessChannel() override;

  SubprocessChannel(const SubprocessChannel&) = delete;
  SubprocessChannel& operator=(const SubprocessChannel&) = delete;

  std::string exchange(const std::string& request_line) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// One envelope per HTTP POST body at `/rpc`.
class HttpChannel : public Channel {
 public:
  HttpChannel(std::string host, int port);
  std::string exchange(const std::string& request_line) override;

 private:
  std::string host_;
  int port_;
};

/// Serves newline-delimited requests from `in` until end of stream.
void serve_stream(MessageServer& server, std::istream& in, std::ostream& out);

/// Background HTTP listener for a MessageServer.
class HttpServer {
 public:
  HttpServer();
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and starts listening on a worker thread.
  int start(std::shared_ptr<MessageServer> server, const std::string& host = "127.0.0.1",
            int port = 0);
  /// Binds and blocks in the calling thread.
  void run(std::shared_ptr<MessageServer> server, const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace maskmesh::protocol
