#pragma once

// HTTP facade over the optimize / suggest / select loop. Sessions live in
// memory; each runs at most one optimization on a background thread.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "offcut/io.hpp"
#include "offcut/optimizer.hpp"

namespace offcut {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

enum class RunState : std::uint8_t { Idle, Running, Done, Cancelled, Failed };

const char* to_string(RunState s);

struct Session {
  std::string id;
  DesignDocument doc;
  DesignParams x;
  /// Placements of the adopted snapshot; empty means dock the current design.
  std::vector<PlacementRecord> placements;
  std::size_t locks = 0;

  SearchConfig config;
  SearchResult result;
  std::vector<std::size_t> suggestions;  // indices into result.results

  RunState state = RunState::Idle;
  SearchProgress progress;
  std::string error;
  std::atomic<bool> cancel{false};
  std::jthread runner;

  std::mutex mutex;
};

class Service {
 public:
  Service() = default;
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Routes one request. `query` holds decoded query parameters.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& query = {});

  /// Blocks until the session's optimizer thread (if any) has finished.
  void wait(const std::string& id);

 private:
  std::shared_ptr<Session> find(const std::string& id);

  HttpResponse create(const std::string& body);
  HttpResponse design(Session& s);
  HttpResponse optimize(const std::shared_ptr<Session>& s, const std::string& body);
  HttpResponse cancel(Session& s);
  HttpResponse status(Session& s);
  HttpResponse suggestions(Session& s);
  HttpResponse path_snapshot(Session& s, const std::string& k, const std::string& t);
  HttpResponse select(Session& s, const std::string& body);
  HttpResponse lock(Session& s, const std::string& body);
  HttpResponse edit(Session& s, const std::string& body);
  HttpResponse layout(Session& s);
  HttpResponse plan(Session& s, const std::map<std::string, std::string>& query);
  HttpResponse diagnostics(Session& s);

  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_id_ = 1;
};

/// httplib server routing every request to a Service.
class HttpServer {
 public:
  HttpServer();
  ~HttpServer();

  /// Binds `host:port` (0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); returns false when the listener failed.
  bool run();
  void stop();
  Service& service();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace offcut
