#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "smart/filter.hpp"
#include "smart/ingest.hpp"

namespace smart {

inline constexpr std::int64_t kDefaultBinWidthMs = 3600 * 1000;
inline constexpr std::size_t kMaxRiverBins = 100'000;

struct RiverSeries {
  std::int64_t bin_width_ms = kDefaultBinWidthMs;
  // Start of each half-open bin [start, start + width), epoch-aligned.
  std::vector<Timestamp> bins;
  std::map<std::string, std::vector<std::size_t>> series;
  std::vector<std::size_t> unmatched;
};

// Start of the epoch-aligned bin containing `ts`.
Timestamp bin_start_of(Timestamp ts, std::int64_t bin_width_ms);

// Counts posts with ts in [from, to). Bins run from the bin containing
// `from` through the bin containing `to - 1`. A post counts once for every
// filter it matches; "unmatched" holds posts matching none.
// Throws Error(kInvalidArgument) for width <= 0, from >= to, or more than
// kMaxRiverBins bins.
RiverSeries theme_river(std::span<const PostPtr> posts, std::span<const KeywordFilter> filters,
                        std::int64_t bin_width_ms, Timestamp from, Timestamp to);

// Posts in [bin_start, bin_start + width) matching the filter, newest first.
// Throws Error(kUnknownFilter) when `filter_id` is not in `filters`.
std::vector<PostPtr> drill_down(std::span<const PostPtr> posts,
                                std::span<const KeywordFilter> filters,
                                const std::string& filter_id, Timestamp bin_start,
                                std::int64_t bin_width_ms);

}  // namespace smart
