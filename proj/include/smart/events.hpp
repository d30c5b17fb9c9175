#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace smart {

struct PushEvent {
  std::uint64_t seq = 0;
  std::string type;  // post | scores_updated | anomaly | dropped
  nlohmann::json payload;
};

// One subscriber's bounded queue. When it overflows the subscriber is cut
// off: a final "dropped" event is queued and nothing more is delivered.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  // Waits up to `timeout`. nullopt on timeout or after close.
  std::optional<PushEvent> next(std::chrono::milliseconds timeout);

  bool finished() const;
  void close();

 private:
  friend class EventHub;
  // Returns false once the subscriber has been dropped or closed.
  bool offer(const PushEvent& event);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<PushEvent> queue_;
  std::size_t capacity_;
  bool dropped_ = false;
  bool closed_ = false;
};

// Broadcast-only fan-out. publish never blocks on a subscriber.
class EventHub {
 public:
  explicit EventHub(std::size_t queue_capacity = 1024) : capacity_(queue_capacity) {}
  ~EventHub() { close_all(); }

  std::shared_ptr<Subscription> subscribe();
  PushEvent publish(std::string type, nlohmann::json payload);
  std::size_t subscriber_count() const;
  void close_all();

 private:
  mutable std::mutex mu_;
  std::size_t capacity_;
  std::uint64_t seq_ = 0;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

}  // namespace smart
