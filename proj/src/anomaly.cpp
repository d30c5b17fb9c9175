#include "smart/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "smart/error.hpp"
#include "smart/spatial.hpp"
#include "smart/time.hpp"

namespace smart {

BaselineState update(const BaselineState& state, double count) {
  const double a = state.alpha;
  const double diff = count - state.mean;
  BaselineState next = state;
  next.mean = (1.0 - a) * state.mean + a * count;
  next.var = (1.0 - a) * (state.var + a * diff * diff);
  next.n_bins = state.n_bins + 1;
  return next;
}

double z_score(const BaselineState& state, double count) {
  return (count - state.mean) / std::max(std::sqrt(state.var), 1.0);
}

bool is_anomalous(const BaselineState& state, double count, const DetectParams& params) {
  return state.n_bins >= params.warmup && count >= params.min_count &&
         z_score(state, count) >= params.z_threshold;
}

std::optional<AnomalyEvent> detect(const BaselineState& state, const std::string& term,
                                   const std::string& scope, Timestamp bin_start,
                                   std::size_t count, const DetectParams& params,
                                   std::vector<std::string> samples) {
  const auto c = static_cast<double>(count);
  if (!is_anomalous(state, c, params)) return std::nullopt;
  if (samples.size() > kMaxSamples) samples.resize(kMaxSamples);
  return AnomalyEvent{term, scope, bin_start, count, z_score(state, c), std::move(samples)};
}

std::string cell_scope(std::int64_t row, std::int64_t col) {
  return "cell:" + std::to_string(row) + ":" + std::to_string(col);
}

BurstDetector::BurstDetector(DetectParams params, double alpha) : params_(params), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha");
}

const BaselineState* BurstDetector::state(const std::string& term, const std::string& scope) const {
  auto it = states_.find({scope, term});
  return it == states_.end() ? nullptr : &it->second;
}

std::vector<AnomalyEvent> BurstDetector::scan_bin(Timestamp bin_start, const BinCounts& counts) {
  if (last_bin_ && !(*last_bin_ < bin_start)) {
    throw Error(ErrorCode::kBinOutOfOrder, format_iso8601(bin_start));
  }
  last_bin_ = bin_start;

  for (const auto& [scope, terms] : counts) {
    for (const auto& [term, bin] : terms) {
      auto [it, inserted] = states_.try_emplace({scope, term});
      if (inserted) it->second.alpha = alpha_;
    }
  }

  std::vector<AnomalyEvent> events;
  for (auto& [key, st] : states_) {
    const auto& [scope, term] = key;
    const TermBin* bin = nullptr;
    if (auto s = counts.find(scope); s != counts.end()) {
      if (auto t = s->second.find(term); t != s->second.end()) bin = &t->second;
    }
    const std::size_t count = bin ? bin->count : 0;
    if (auto ev = detect(st, term, scope, bin_start, count, params_,
                         bin ? bin->samples : std::vector<std::string>{})) {
      events.push_back(std::move(*ev));
    }
    st = update(st, static_cast<double>(count));
  }
  std::sort(events.begin(), events.end(), [](const AnomalyEvent& a, const AnomalyEvent& b) {
    if (a.z != b.z) return a.z > b.z;
    if (a.scope != b.scope) return a.scope < b.scope;
    return a.term < b.term;
  });
  return events;
}

TermBurstMonitor::TermBurstMonitor(std::int64_t bin_width_ms, double grid_res,
                                   DetectParams params, double alpha, const Stopwords* stopwords)
    : width_(bin_width_ms), res_(grid_res), stopwords_(stopwords), detector_(params, alpha) {
  if (bin_width_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "bin_width");
}

std::vector<AnomalyEvent> TermBurstMonitor::close_through(std::int64_t bin_index) {
  std::vector<AnomalyEvent> events;
  if (!open_bin_) return events;
  const BinCounts empty;
  for (std::int64_t b = *open_bin_; b <= bin_index; ++b) {
    auto batch = detector_.scan_bin(Timestamp{b * width_}, b == *open_bin_ ? open_counts_ : empty);
    events.insert(events.end(), std::make_move_iterator(batch.begin()),
                  std::make_move_iterator(batch.end()));
  }
  open_counts_.clear();
  open_bin_ = bin_index + 1;
  return events;
}

std::vector<AnomalyEvent> TermBurstMonitor::observe(const Post& post) {
  const std::int64_t b = floor_div(post.ts.ms, width_);
  std::vector<AnomalyEvent> events;
  if (!open_bin_) {
    open_bin_ = b;
  } else if (b < *open_bin_) {
    ++late_;
    return events;
  } else if (b > *open_bin_) {
    events = close_through(b - 1);
  }

  std::set<std::string_view> distinct;
  for (const auto& t : post.tokens) {
    if (stopwords_ && stopwords_->contains(t)) continue;
    distinct.insert(t);
  }
  std::string cell;
  if (post.geo) {
    GridCell c = cell_of(post.geo->lat, post.geo->lon, res_);
    cell = cell_scope(c.row, c.col);
  }
  auto add = [&](const std::string& scope, std::string_view term) {
    auto& bin = open_counts_[scope][std::string(term)];
    ++bin.count;
    if (bin.samples.size() < kMaxSamples) bin.samples.push_back(post.id);
  };
  for (auto term : distinct) {
    add(kGlobalScope, term);
    if (!cell.empty()) add(cell, term);
  }
  return events;
}

std::vector<AnomalyEvent> TermBurstMonitor::advance_to(Timestamp now) {
  const std::int64_t current = floor_div(now.ms, width_);
  if (!open_bin_ || current <= *open_bin_) return {};
  return close_through(current - 1);
}

}  // namespace smart
