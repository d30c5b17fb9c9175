#pragma once

#include <unistd.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "smart/ingest.hpp"
#include "smart/random.hpp"

namespace testing {

// Fresh directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("smart_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

// Small vocabulary so that terms repeat and ties are common.
inline const std::vector<std::string>& vocab() {
  static const std::vector<std::string> v = {
      "rain",  "snow",  "storm", "wind",  "flood", "the",   "and",   "coffee", "music", "game",
      "job",   "hiring", "ice",  "road",  "power", "outage", "tree", "fire",   "smoke", "traffic",
      "#wx",   "@nws",  "crash", "bridge", "ferry", "park",  "beach", "school", "closed", "open"};
  return v;
}

struct PostGenOptions {
  double lat_lo = 40.0, lat_hi = 41.0;
  double lon_lo = -74.5, lon_hi = -73.5;
  double geo_frac = 0.85;
  std::int64_t t0 = 1550577600000;  // 2019-02-19T12:00Z
  std::int64_t span_ms = 48LL * 3600 * 1000;
  int min_words = 1, max_words = 12;
  // Coordinates snap to this step so points land on cell edges now and then.
  double snap = 0.005;
};

inline std::string random_text(smart::Rng& rng, const PostGenOptions& o) {
  const auto& v = vocab();
  int n = o.min_words + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_words - o.min_words + 1)));
  std::string text;
  for (int i = 0; i < n; ++i) {
    if (!text.empty()) text += rng.chance(0.1) ? ", " : " ";
    const auto& w = v[rng.below(v.size())];
    text += rng.chance(0.1) ? std::string(1, static_cast<char>(std::toupper(w[0]))) + w.substr(1) : w;
  }
  if (rng.chance(0.1)) text += " https://t.co/xyz";
  return text;
}

inline std::vector<smart::PostPtr> random_posts(std::size_t n, std::uint64_t seed,
                                                const PostGenOptions& o = {}) {
  smart::Rng rng(seed);
  std::vector<smart::PostPtr> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<smart::GeoPoint> geo;
    if (rng.chance(o.geo_frac)) {
      double lat = rng.uniform(o.lat_lo, o.lat_hi);
      double lon = rng.uniform(o.lon_lo, o.lon_hi);
      if (o.snap > 0 && rng.chance(0.2)) {
        lat = std::round(lat / o.snap) * o.snap;
        lon = std::round(lon / o.snap) * o.snap;
      }
      geo = smart::GeoPoint{lat, lon};
    }
    // Coarse timestamps produce equal-time ties.
    std::int64_t ts = o.t0 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(o.span_ms / 1000))) * 1000;
    char id[24];
    std::snprintf(id, sizeof id, "q%06zu", i);
    out.push_back(std::make_shared<const smart::Post>(smart::make_post(
        id, smart::Timestamp{ts}, "u" + std::to_string(rng.below(50)), random_text(rng, o), geo)));
  }
  return out;
}

}  // namespace testing
