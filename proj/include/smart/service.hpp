#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "smart/engine.hpp"

namespace httplib {
class Server;
}

namespace smart {

// HTTP facade over an Engine. Every body is JSON; /ingest takes NDJSON and
// /stream is a server-sent-event feed.
class Service {
 public:
  explicit Service(Engine& engine);
  ~Service();

  // Binds without serving yet. port 0 picks a free port. Returns the bound
  // port. Throws Error(kPortInUse).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();
  bool running() const;

 private:
  void routes();

  Engine& engine_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<bool> stopping_{false};
};

}  // namespace smart
