#include "smart/temporal.hpp"

#include <algorithm>

#include "smart/error.hpp"
#include "smart/spatial.hpp"
#include "smart/time.hpp"

namespace smart {

Timestamp bin_start_of(Timestamp ts, std::int64_t bin_width_ms) {
  return Timestamp{floor_div(ts.ms, bin_width_ms) * bin_width_ms};
}

RiverSeries theme_river(std::span<const PostPtr> posts, std::span<const KeywordFilter> filters,
                        std::int64_t bin_width_ms, Timestamp from, Timestamp to) {
  if (bin_width_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "bin");
  if (!(from < to)) throw Error(ErrorCode::kInvalidArgument, "from");
  const std::int64_t first = floor_div(from.ms, bin_width_ms);
  const std::int64_t last = floor_div(to.ms - 1, bin_width_ms);
  if (last - first + 1 > static_cast<std::int64_t>(kMaxRiverBins)) {
    throw Error(ErrorCode::kInvalidArgument, "bin");
  }
  const auto n = static_cast<std::size_t>(last - first + 1);

  RiverSeries river;
  river.bin_width_ms = bin_width_ms;
  river.bins.reserve(n);
  for (std::int64_t b = first; b <= last; ++b) river.bins.push_back(Timestamp{b * bin_width_ms});
  for (const auto& f : filters) river.series[f.id].assign(n, 0);
  river.unmatched.assign(n, 0);

  std::vector<std::vector<std::size_t>*> slots;
  slots.reserve(filters.size());
  for (const auto& f : filters) slots.push_back(&river.series[f.id]);

  for (const auto& p : posts) {
    if (p->ts < from || !(p->ts < to)) continue;
    const auto bin = static_cast<std::size_t>(floor_div(p->ts.ms, bin_width_ms) - first);
    bool any = false;
    for (std::size_t i = 0; i < filters.size(); ++i) {
      if (matches(filters[i], p->tokens)) {
        ++(*slots[i])[bin];
        any = true;
      }
    }
    if (!any) ++river.unmatched[bin];
  }
  return river;
}

std::vector<PostPtr> drill_down(std::span<const PostPtr> posts,
                                std::span<const KeywordFilter> filters,
                                const std::string& filter_id, Timestamp bin_start,
                                std::int64_t bin_width_ms) {
  if (bin_width_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "bin");
  auto it = std::find_if(filters.begin(), filters.end(),
                         [&](const KeywordFilter& f) { return f.id == filter_id; });
  if (it == filters.end()) throw Error(ErrorCode::kUnknownFilter, filter_id);
  const Timestamp end{bin_start.ms + bin_width_ms};
  std::vector<PostPtr> out;
  for (const auto& p : posts) {
    if (p->ts < bin_start || !(p->ts < end)) continue;
    if (matches(*it, p->tokens)) out.push_back(p);
  }
  sort_newest_first(out);
  return out;
}

}  // namespace smart
