#include "maskmesh/channel.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <istream>
#include <ostream>

#include <httplib.h>

namespace maskmesh::protocol {

namespace {

const char* error_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::VersionMismatch: return "version_mismatch";
    case ErrorCode::UnknownType: return "unknown_type";
    default: return "bad_request";
  }
}

// Best-effort request id from a line that failed strict decoding.
std::int64_t salvage_request_id(std::string_view line) {
  const Json j = Json::parse(line, nullptr, false);
  if (j.is_object()) {
    const auto it = j.find("request_id");
    if (it != j.end() && it->is_number_integer() && it->get<std::int64_t>() >= 0) {
      return it->get<std::int64_t>();
    }
  }
  return 0;
}

}  // namespace

std::string MessageServer::handle_line(std::string_view line) {
  std::lock_guard lock(mutex_);
  Envelope request;
  try {
    request = decode_message(line);
  } catch (const Error& e) {
    return encode_message(make_envelope(ErrorBody{error_code_for(e.code()), e.what()},
                                        salvage_request_id(line)));
  }
  try {
    Envelope response = dispatch(request);
    response.request_id = request.request_id;
    return encode_message(response);
  } catch (const RequestFailure& e) {
    return encode_message(make_envelope(ErrorBody{e.code(), e.what()}, request.request_id));
  } catch (const Error& e) {
    return encode_message(
        make_envelope(ErrorBody{error_code_for(e.code()), e.what()}, request.request_id));
  } catch (const std::exception& e) {
    return encode_message(make_envelope(ErrorBody{"internal", e.what()}, request.request_id));
  }
}

std::string LoopbackChannel::exchange(const std::string& request_line) {
  return server_->handle_line(request_line);
}

std::string RecordingChannel::exchange(const std::string& request_line) {
  std::string response = inner_->exchange(request_line);
  transcript_->push_back(request_line);
  transcript_->push_back(response);
  return response;
}

SubprocessChannel::SubprocessChannel(const std::string& command) {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw Error(ErrorCode::BackendUnavailable, "pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::BackendUnavailable, "pipe() failed");
  }
  pid_ = ::fork();
  if (pid_ < 0) throw Error(ErrorCode::BackendUnavailable, "fork() failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

SubprocessChannel::~SubprocessChannel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (::waitpid(pid_, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      ::usleep(1000);
    }
  }
}

std::string SubprocessChannel::exchange(const std::string& request_line) {
  std::size_t written = 0;
  while (written < request_line.size()) {
    const ssize_t n =
        ::write(to_child_, request_line.data() + written, request_line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::BackendUnavailable, "backend process closed its input");
    }
    written += static_cast<std::size_t>(n);
  }
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl + 1);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::BackendUnavailable, "backend process exited");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

HttpChannel::HttpChannel(std::string host, int port) : host_(std::move(host)), port_(port) {}

std::string HttpChannel::exchange(const std::string& request_line) {
  httplib::Client client(host_, port_);
  client.set_read_timeout(600, 0);
  const auto result = client.Post("/rpc", request_line, "application/x-ndjson");
  if (!result) {
    throw Error(ErrorCode::BackendUnavailable,
                "http://" + host_ + ":" + std::to_string(port_) + " unreachable: " +
                    httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw Error(ErrorCode::BackendProtocolError, "HTTP status " + std::to_string(result->status));
  }
  return result->body;
}

void serve_stream(MessageServer& server, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << server.handle_line(line);
    out.flush();
  }
}

struct HttpServer::Impl {
  httplib::Server http;
  std::thread worker;
};

HttpServer::HttpServer() : impl_(std::make_unique<Impl>()) {}

HttpServer::~HttpServer() { stop(); }

namespace {

void install_handler(httplib::Server& http, std::shared_ptr<MessageServer> server) {
  http.Post("/rpc", [server](const httplib::Request& req, httplib::Response& res) {
    res.set_content(server->handle_line(req.body), "application/x-ndjson");
  });
}

}  // namespace

int HttpServer::start(std::shared_ptr<MessageServer> server, const std::string& host, int port) {
  install_handler(impl_->http, std::move(server));
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::BackendUnavailable, "cannot bind " + host);
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void HttpServer::run(std::shared_ptr<MessageServer> server, const std::string& host, int port) {
  install_handler(impl_->http, std::move(server));
  if (!impl_->http.listen(host, port)) {
    throw Error(ErrorCode::BackendUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace maskmesh::protocol
