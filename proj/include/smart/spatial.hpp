#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "smart/filter.hpp"
#include "smart/ingest.hpp"
#include "smart/topics.hpp"

namespace smart {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDefaultGridRes = 0.01;

struct GridCell {
  std::int64_t row = 0;
  std::int64_t col = 0;
  double res = kDefaultGridRes;

  double lat_lo() const { return static_cast<double>(row) * res; }
  double lat_hi() const { return static_cast<double>(row + 1) * res; }
  double lon_lo() const { return static_cast<double>(col) * res; }
  double lon_hi() const { return static_cast<double>(col + 1) * res; }

  friend bool operator==(const GridCell& a, const GridCell& b) {
    return a.row == b.row && a.col == b.col && a.res == b.res;
  }
};

// Lower-edge rule: a point on a boundary belongs to the cell whose lower
// edge it is. Throws Error(kOutOfRange) for invalid coordinates or res <= 0.
GridCell cell_of(double lat, double lon, double res = kDefaultGridRes);

// Closed on both axes. lon_min > lon_max wraps across the antimeridian.
// A box with zero extent on either axis contains nothing.
struct BBox {
  double lat_min = -90.0;
  double lon_min = -180.0;
  double lat_max = 90.0;
  double lon_max = 180.0;
};

struct Circle {
  GeoPoint center;
  double radius_m = 0.0;
};

using Region = std::variant<BBox, Circle>;

struct LensQuery {
  Region region = BBox{};
  // Half-open [from, to).
  Timestamp from{std::numeric_limits<std::int64_t>::min()};
  Timestamp to{std::numeric_limits<std::int64_t>::max()};
  std::optional<std::string> filter_id;
  std::size_t k = 10;
};

// Throws Error(kInvalidArgument) naming the offending part ("bbox",
// "circle", "from"/"to", "k").
void validate(const LensQuery& query);

double haversine_m(GeoPoint a, GeoPoint b);

bool contains(const Region& region, GeoPoint p);

// Membership test shared by every lens: inside the region and time range
// and, when given, matching the filter.
bool in_scope(const Post& post, const LensQuery& query, const KeywordFilter* filter);

// Posts newest first, ties by id ascending.
void sort_newest_first(std::vector<PostPtr>& posts);

// Fixed-resolution lat/lon grid over geolocated posts. One writer, many
// readers; a reader never sees a partially inserted post.
class SpatialIndex {
 public:
  explicit SpatialIndex(double res = kDefaultGridRes);

  double res() const { return res_; }

  // Posts without geo are ignored. Returns whether the post was indexed.
  bool insert(PostPtr post);

  std::size_t size() const;
  std::size_t cell_count() const;

  // Geolocated posts in the region's candidate cells that pass in_scope,
  // unsorted.
  std::vector<PostPtr> collect(const LensQuery& query, const KeywordFilter* filter) const;

  // Every indexed post, in insertion order.
  std::vector<PostPtr> all() const;

 private:
  void collect_box(double lat_lo, double lat_hi, double lon_lo, double lon_hi,
                   const LensQuery& query, const KeywordFilter* filter,
                   std::vector<PostPtr>& out) const;

  double res_;
  mutable std::shared_mutex mu_;
  std::vector<PostPtr> posts_;
  std::map<std::int64_t, std::map<std::int64_t, std::vector<std::uint32_t>>> cells_;
};

// Exactly the posts in region/time (and filter), newest first.
std::vector<PostPtr> posts_in(const SpatialIndex& index, const LensQuery& query,
                              const KeywordFilter* filter = nullptr);

// top_terms over posts_in(query), k = query.k.
std::vector<TermCount> content_lens(const SpatialIndex& index, const LensQuery& query,
                                    const Stopwords* stopwords, const KeywordFilter* filter = nullptr);

struct FilterKeywords {
  std::string filter_id;
  std::vector<TermCount> keywords;  // count desc, term asc; at most query.k
};

// For each filter, matched include-term counts over the posts in scope
// (query.filter_id is ignored; pass the filters to aggregate).
std::vector<FilterKeywords> cluster_lens(const SpatialIndex& index, const LensQuery& query,
                                         std::span<const KeywordFilter> filters);

}  // namespace smart
