#include "smart/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smart/error.hpp"

namespace smart {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// floor(value / res), corrected so value lies in [idx*res, (idx+1)*res)
// as evaluated in double arithmetic.
std::int64_t grid_index(double value, double res) {
  auto idx = static_cast<std::int64_t>(std::floor(value / res));
  if (static_cast<double>(idx + 1) * res <= value) ++idx;
  if (static_cast<double>(idx) * res > value) --idx;
  return idx;
}

bool lon_in(double lon, double lo, double hi) {
  if (lo <= hi) return lon >= lo && lon <= hi;
  return lon >= lo || lon <= hi;
}

bool valid_lat(double v) { return std::isfinite(v) && v >= -90.0 && v <= 90.0; }
bool valid_lon(double v) { return std::isfinite(v) && v >= -180.0 && v <= 180.0; }

}  // namespace

GridCell cell_of(double lat, double lon, double res) {
  if (!(res > 0.0) || !std::isfinite(res)) throw Error(ErrorCode::kOutOfRange, "res");
  if (!valid_lat(lat)) throw Error(ErrorCode::kOutOfRange, "lat");
  if (!valid_lon(lon)) throw Error(ErrorCode::kOutOfRange, "lon");
  return {grid_index(lat, res), grid_index(lon, res), res};
}

void validate(const LensQuery& query) {
  if (const auto* box = std::get_if<BBox>(&query.region)) {
    if (!valid_lat(box->lat_min) || !valid_lat(box->lat_max) || !valid_lon(box->lon_min) ||
        !valid_lon(box->lon_max) || box->lat_min > box->lat_max) {
      throw Error(ErrorCode::kInvalidArgument, "bbox");
    }
  } else {
    const auto& c = std::get<Circle>(query.region);
    if (!valid_lat(c.center.lat) || !valid_lon(c.center.lon) || !(c.radius_m > 0.0) ||
        !std::isfinite(c.radius_m)) {
      throw Error(ErrorCode::kInvalidArgument, "circle");
    }
  }
  if (!(query.from < query.to)) throw Error(ErrorCode::kInvalidArgument, "from");
  if (query.k == 0) throw Error(ErrorCode::kInvalidArgument, "k");
}

double haversine_m(GeoPoint a, GeoPoint b) {
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

bool contains(const Region& region, GeoPoint p) {
  if (const auto* box = std::get_if<BBox>(&region)) {
    if (box->lat_min == box->lat_max || box->lon_min == box->lon_max) return false;
    return p.lat >= box->lat_min && p.lat <= box->lat_max &&
           lon_in(p.lon, box->lon_min, box->lon_max);
  }
  const auto& c = std::get<Circle>(region);
  return haversine_m(c.center, p) <= c.radius_m;
}

bool in_scope(const Post& post, const LensQuery& query, const KeywordFilter* filter) {
  if (!post.geo) return false;
  if (post.ts < query.from || !(post.ts < query.to)) return false;
  if (!contains(query.region, *post.geo)) return false;
  return filter == nullptr || matches(*filter, post.tokens);
}

void sort_newest_first(std::vector<PostPtr>& posts) {
  std::sort(posts.begin(), posts.end(), [](const PostPtr& a, const PostPtr& b) {
    if (a->ts != b->ts) return a->ts > b->ts;
    return a->id < b->id;
  });
}

SpatialIndex::SpatialIndex(double res) : res_(res) {
  if (!(res > 0.0) || !std::isfinite(res)) throw Error(ErrorCode::kOutOfRange, "res");
}

bool SpatialIndex::insert(PostPtr post) {
  if (!post || !post->geo) return false;
  GridCell cell = cell_of(post->geo->lat, post->geo->lon, res_);
  std::unique_lock lock(mu_);
  cells_[cell.row][cell.col].push_back(static_cast<std::uint32_t>(posts_.size()));
  posts_.push_back(std::move(post));
  return true;
}

std::size_t SpatialIndex::size() const {
  std::shared_lock lock(mu_);
  return posts_.size();
}

std::size_t SpatialIndex::cell_count() const {
  std::shared_lock lock(mu_);
  std::size_t n = 0;
  for (const auto& [row, cols] : cells_) n += cols.size();
  return n;
}

std::vector<PostPtr> SpatialIndex::all() const {
  std::shared_lock lock(mu_);
  return posts_;
}

void SpatialIndex::collect_box(double lat_lo, double lat_hi, double lon_lo, double lon_hi,
                               const LensQuery& query, const KeywordFilter* filter,
                               std::vector<PostPtr>& out) const {
  const std::int64_t r0 = grid_index(lat_lo, res_), r1 = grid_index(lat_hi, res_);
  const std::int64_t c0 = grid_index(lon_lo, res_), c1 = grid_index(lon_hi, res_);
  for (auto row = cells_.lower_bound(r0); row != cells_.end() && row->first <= r1; ++row) {
    const auto& cols = row->second;
    for (auto col = cols.lower_bound(c0); col != cols.end() && col->first <= c1; ++col) {
      for (std::uint32_t idx : col->second) {
        const PostPtr& p = posts_[idx];
        if (in_scope(*p, query, filter)) out.push_back(p);
      }
    }
  }
}

std::vector<PostPtr> SpatialIndex::collect(const LensQuery& query,
                                           const KeywordFilter* filter) const {
  std::vector<PostPtr> out;
  std::shared_lock lock(mu_);
  if (const auto* box = std::get_if<BBox>(&query.region)) {
    if (box->lon_min <= box->lon_max) {
      collect_box(box->lat_min, box->lat_max, box->lon_min, box->lon_max, query, filter, out);
    } else {
      collect_box(box->lat_min, box->lat_max, box->lon_min, 180.0, query, filter, out);
      collect_box(box->lat_min, box->lat_max, -180.0, box->lon_max, query, filter, out);
    }
    return out;
  }
  const auto& c = std::get<Circle>(query.region);
  // Candidate box padded slightly; the exact haversine test runs per post.
  constexpr double kPad = 1e-6;
  const double angular = c.radius_m / kEarthRadiusM;
  const double dlat = angular / kDegToRad;
  const double lat_lo = c.center.lat - dlat - kPad;
  const double lat_hi = c.center.lat + dlat + kPad;
  if (lat_lo <= -90.0 || lat_hi >= 90.0 || angular >= std::numbers::pi / 2) {
    collect_box(std::max(lat_lo, -90.0), std::min(lat_hi, 90.0), -180.0, 180.0, query, filter, out);
    return out;
  }
  const double dlon =
      std::asin(std::min(1.0, std::sin(angular) / std::cos(c.center.lat * kDegToRad))) / kDegToRad +
      kPad;
  const double lon_lo = c.center.lon - dlon, lon_hi = c.center.lon + dlon;
  if (dlon >= 180.0) {
    collect_box(lat_lo, lat_hi, -180.0, 180.0, query, filter, out);
  } else if (lon_lo < -180.0) {
    collect_box(lat_lo, lat_hi, -180.0, lon_hi, query, filter, out);
    collect_box(lat_lo, lat_hi, lon_lo + 360.0, 180.0, query, filter, out);
  } else if (lon_hi > 180.0) {
    collect_box(lat_lo, lat_hi, lon_lo, 180.0, query, filter, out);
    collect_box(lat_lo, lat_hi, -180.0, lon_hi - 360.0, query, filter, out);
  } else {
    collect_box(lat_lo, lat_hi, lon_lo, lon_hi, query, filter, out);
  }
  return out;
}

std::vector<PostPtr> posts_in(const SpatialIndex& index, const LensQuery& query,
                              const KeywordFilter* filter) {
  validate(query);
  auto out = index.collect(query, filter);
  sort_newest_first(out);
  return out;
}

std::vector<TermCount> content_lens(const SpatialIndex& index, const LensQuery& query,
                                    const Stopwords* stopwords, const KeywordFilter* filter) {
  auto posts = posts_in(index, query, filter);
  return top_terms(posts, query.k, stopwords);
}

std::vector<FilterKeywords> cluster_lens(const SpatialIndex& index, const LensQuery& query,
                                         std::span<const KeywordFilter> filters) {
  validate(query);
  auto posts = index.collect(query, nullptr);
  std::vector<FilterKeywords> out;
  out.reserve(filters.size());
  for (const auto& f : filters) {
    std::map<std::string, std::size_t> counts;
    for (const auto& p : posts) {
      for (auto& [term, c] : matched_terms(f, p->tokens)) counts[term] += c;
    }
    FilterKeywords fk{f.id, {}};
    for (auto& [term, c] : counts) fk.keywords.push_back({term, c});
    std::stable_sort(fk.keywords.begin(), fk.keywords.end(),
                     [](const TermCount& a, const TermCount& b) { return a.count > b.count; });
    if (fk.keywords.size() > query.k) fk.keywords.resize(query.k);
    out.push_back(std::move(fk));
  }
  return out;
}

}  // namespace smart
