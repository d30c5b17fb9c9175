#include "smart/events.hpp"

#include <algorithm>

namespace smart {

std::optional<PushEvent> Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  PushEvent e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

bool Subscription::finished() const {
  std::lock_guard lock(mu_);
  return closed_ || (dropped_ && queue_.empty());
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::offer(const PushEvent& event) {
  {
    std::lock_guard lock(mu_);
    if (dropped_ || closed_) return false;
    if (queue_.size() >= capacity_) {
      dropped_ = true;
      queue_.push_back(PushEvent{event.seq, "dropped",
                                 {{"reason", "slow consumer"}, {"missed_from_seq", event.seq}}});
    } else {
      queue_.push_back(event);
    }
  }
  cv_.notify_all();
  return true;
}

std::shared_ptr<Subscription> EventHub::subscribe() {
  auto sub = std::make_shared<Subscription>(capacity_);
  std::lock_guard lock(mu_);
  subs_.push_back(sub);
  return sub;
}

PushEvent EventHub::publish(std::string type, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  PushEvent event{++seq_, std::move(type), std::move(payload)};
  std::erase_if(subs_, [&](const auto& s) { return !s->offer(event) || s->finished(); });
  return event;
}

std::size_t EventHub::subscriber_count() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

void EventHub::close_all() {
  std::lock_guard lock(mu_);
  for (auto& s : subs_) s->close();
  subs_.clear();
}

}  // namespace smart
