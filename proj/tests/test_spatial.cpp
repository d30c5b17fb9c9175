#include <doctest.h>

#include <algorithm>
#include <map>
#include <thread>

#include "smart/error.hpp"
#include "smart/spatial.hpp"
#include "support.hpp"

using namespace smart;

namespace {

PostPtr at(const std::string& id, double lat, double lon, std::int64_t ts = 0, const std::string& text = "x1") {
  return std::make_shared<const Post>(make_post(id, Timestamp{ts}, "u", text, GeoPoint{lat, lon}));
}

std::vector<std::string> ids(const std::vector<PostPtr>& posts) {
  std::vector<std::string> out;
  for (const auto& p : posts) out.push_back(p->id);
  return out;
}

// Oracles written without the index or the library's predicates.
bool oracle_in_box(const BBox& b, double lat, double lon) {
  if (b.lat_min == b.lat_max || b.lon_min == b.lon_max) return false;
  if (lat < b.lat_min || lat > b.lat_max) return false;
  return b.lon_min <= b.lon_max ? (lon >= b.lon_min && lon <= b.lon_max) : (lon >= b.lon_min || lon <= b.lon_max);
}

double oracle_distance(double lat1, double lon1, double lat2, double lon2) {
  // Spherical law of haversines written out independently.
  const double r = 6371000.0, d = 3.14159265358979323846 / 180.0;
  double a = std::pow(std::sin((lat2 - lat1) * d / 2), 2) +
             std::cos(lat1 * d) * std::cos(lat2 * d) * std::pow(std::sin((lon2 - lon1) * d / 2), 2);
  return 2 * r * std::atan2(std::sqrt(a), std::sqrt(1 - a));
}

std::vector<PostPtr> oracle_posts_in(const std::vector<PostPtr>& all, const LensQuery& q, const KeywordFilter* f) {
  std::vector<PostPtr> out;
  for (const auto& p : all) {
    if (!p->geo || p->ts < q.from || !(p->ts < q.to)) continue;
    bool inside;
    if (auto* b = std::get_if<BBox>(&q.region)) {
      inside = oracle_in_box(*b, p->geo->lat, p->geo->lon);
    } else {
      auto& c = std::get<Circle>(q.region);
      inside = oracle_distance(c.center.lat, c.center.lon, p->geo->lat, p->geo->lon) <= c.radius_m;
    }
    if (inside && (!f || matches(*f, p->tokens))) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const PostPtr& a, const PostPtr& b) {
    return a->ts.ms != b->ts.ms ? a->ts.ms > b->ts.ms : a->id < b->id;
  });
  return out;
}

LensQuery random_query(Rng& rng) {
  LensQuery q;
  if (rng.chance(0.6)) {
    double la = rng.uniform(39.9, 41.1), lb = rng.uniform(39.9, 41.1);
    double oa = rng.uniform(-74.6, -73.4), ob = rng.uniform(-74.6, -73.4);
    // Snap some edges onto the data grid to exercise closed boundaries.
    if (rng.chance(0.3)) {
      la = std::round(la / 0.005) * 0.005;
      ob = std::round(ob / 0.005) * 0.005;
    }
    q.region = BBox{std::min(la, lb), std::min(oa, ob), std::max(la, lb), std::max(oa, ob)};
  } else {
    q.region = Circle{GeoPoint{rng.uniform(40.0, 41.0), rng.uniform(-74.5, -73.5)}, rng.uniform(100.0, 60000.0)};
  }
  if (rng.chance(0.5)) {
    q.from = Timestamp{1550577600000 + static_cast<std::int64_t>(rng.below(24)) * 3600000};
    q.to = Timestamp{q.from.ms + static_cast<std::int64_t>(1 + rng.below(30)) * 3600000};
  }
  q.k = 1 + rng.below(15);
  return q;
}

}  // namespace

TEST_CASE("cell_of lower-edge rule and validation") {
  auto c = cell_of(40.7, -74.0, 0.01);
  CHECK(c.lat_lo() <= 40.7);
  CHECK(40.7 < c.lat_hi());
  CHECK(c.lon_lo() <= -74.0);
  CHECK(-74.0 < c.lon_hi());
  CHECK(cell_of(0.0, 0.0, 1.0) == GridCell{0, 0, 1.0});
  CHECK(cell_of(-0.5, -0.5, 1.0) == GridCell{-1, -1, 1.0});
  CHECK(cell_of(1.0, 1.0, 1.0) == GridCell{1, 1, 1.0});
  CHECK(cell_of(90.0, 180.0, 1.0) == GridCell{90, 180, 1.0});
  CHECK_THROWS_AS(cell_of(91, 0), Error);
  CHECK_THROWS_AS(cell_of(0, 181), Error);
  CHECK_THROWS_AS(cell_of(0, 0, 0.0), Error);

  Rng rng(2);
  for (int i = 0; i < 5000; ++i) {
    double lat = rng.uniform(-90, 90), lon = rng.uniform(-180, 180), res = rng.uniform(0.001, 2.0);
    auto g = cell_of(lat, lon, res);
    CHECK(g.lat_lo() <= lat);
    CHECK(lat < g.lat_hi());
  }
}

TEST_CASE("haversine reference distances") {
  // One degree of latitude on the 6371 km sphere.
  CHECK(haversine_m({0, 0}, {1, 0}) == doctest::Approx(111194.93).epsilon(1e-6));
  CHECK(haversine_m({40.7, -74}, {40.7, -74}) == 0.0);
  // Quarter of the equator.
  CHECK(haversine_m({0, 0}, {0, 90}) == doctest::Approx(6371000.0 * 3.14159265358979 / 2).epsilon(1e-9));
  // Antipodes.
  CHECK(haversine_m({0, 0}, {0, 180}) == doctest::Approx(6371000.0 * 3.14159265358979).epsilon(1e-9));
}

TEST_CASE("bbox semantics: closed, degenerate empty, antimeridian wrap") {
  BBox b{40.0, -74.0, 41.0, -73.0};
  CHECK(contains(b, {40.0, -74.0}));
  CHECK(contains(b, {41.0, -73.0}));
  CHECK_FALSE(contains(b, {41.0000001, -73.5}));
  CHECK_FALSE(contains(BBox{40, -74, 40, -73}, {40, -73.5}));
  CHECK_FALSE(contains(BBox{40, -74, 41, -74}, {40.5, -74}));
  BBox wrap{-10, 170, 10, -170};
  CHECK(contains(wrap, {0, 175}));
  CHECK(contains(wrap, {0, -175}));
  CHECK(contains(wrap, {0, 180}));
  CHECK_FALSE(contains(wrap, {0, 0}));
  Circle c{{40.7, -74.0}, 1000};
  CHECK(contains(c, {40.7, -74.0}));
  CHECK_FALSE(contains(c, {40.72, -74.0}));
}

TEST_CASE("validate names the bad parameter") {
  auto detail = [](LensQuery q) {
    try {
      validate(q);
    } catch (const Error& e) {
      return e.detail();
    }
    return std::string();
  };
  LensQuery q;
  CHECK(detail(q).empty());
  q.region = BBox{41, -74, 40, -73};
  CHECK(detail(q) == "bbox");
  q.region = BBox{40, -74, 91, -73};
  CHECK(detail(q) == "bbox");
  q.region = Circle{{40, -74}, 0};
  CHECK(detail(q) == "circle");
  q.region = BBox{};
  q.from = Timestamp{5};
  q.to = Timestamp{5};
  CHECK(detail(q) == "from");
  q.to = Timestamp{6};
  q.k = 0;
  CHECK(detail(q) == "k");
}

TEST_CASE("circle across the antimeridian and near the pole") {
  SpatialIndex idx(1.0);
  idx.insert(at("east", 0.0, 179.99));
  idx.insert(at("west", 0.0, -179.99));
  idx.insert(at("far", 0.0, 170.0));
  idx.insert(at("pole", 89.99, 0.0));
  idx.insert(at("pole2", 89.99, 180.0));
  LensQuery q;
  q.region = Circle{{0.0, 180.0}, 5000};
  CHECK(ids(posts_in(idx, q)) == std::vector<std::string>{"east", "west"});
  q.region = Circle{{90.0, 0.0}, 5000};
  CHECK(ids(posts_in(idx, q)) == std::vector<std::string>{"pole", "pole2"});
  q.region = BBox{-1, 179, 1, -179};
  CHECK(ids(posts_in(idx, q)) == std::vector<std::string>{"east", "west"});
}

TEST_CASE("index ignores posts without geo and keeps insertion order") {
  SpatialIndex idx;
  CHECK(idx.insert(at("a", 40.7, -74.0)));
  CHECK_FALSE(idx.insert(std::make_shared<const Post>(make_post("b", Timestamp{0}, "u", "x"))));
  CHECK(idx.insert(at("c", 40.71, -74.0)));
  CHECK(idx.size() == 2);
  CHECK(idx.cell_count() == 2);
  CHECK(ids(idx.all()) == std::vector<std::string>{"a", "c"});
}

TEST_CASE("posts_in, content_lens and cluster_lens equal linear-scan oracles on 10k posts") {
  auto posts = testing::random_posts(10000, 31);
  SpatialIndex idx(0.01);
  for (const auto& p : posts) idx.insert(p);
  std::vector<KeywordFilter> filters = {compile_filter({"wx", "", {"snow", "rain", "#wx", "power outage"}, {"game"}}),
                                        compile_filter({"traffic", "", {"traffic", "crash", "road closed"}, {}})};
  Rng rng(17);
  int mismatches = 0;
  for (int trial = 0; trial < 60; ++trial) {
    LensQuery q = random_query(rng);
    const KeywordFilter* f = rng.chance(0.5) ? &filters[rng.below(2)] : nullptr;
    auto expected = oracle_posts_in(posts, q, f);
    if (ids(posts_in(idx, q, f)) != ids(expected)) ++mismatches;

    // content lens: counts over exactly the oracle's posts, minus stopwords.
    std::map<std::string, std::size_t> counts;
    for (const auto& p : expected) {
      for (const auto& t : p->tokens) {
        if (!Stopwords::builtin().contains(t)) counts[t]++;
      }
    }
    std::vector<TermCount> want;
    for (const auto& [t, c] : counts) want.push_back({t, c});
    std::stable_sort(want.begin(), want.end(), [](auto& a, auto& b) { return a.count > b.count; });
    if (want.size() > q.k) want.resize(q.k);
    if (content_lens(idx, q, &Stopwords::builtin(), f) != want) ++mismatches;

    // cluster lens: per filter, matched phrase occurrences over unfiltered scope.
    auto scope = oracle_posts_in(posts, q, nullptr);
    auto got = cluster_lens(idx, q, filters);
    REQUIRE(got.size() == filters.size());
    for (std::size_t fi = 0; fi < filters.size(); ++fi) {
      std::map<std::string, std::size_t> kc;
      for (const auto& p : scope) {
        if (!matches(filters[fi], p->tokens)) continue;
        for (const auto& term : filters[fi].include) {
          for (std::size_t s = 0; s + term.tokens.size() <= p->tokens.size(); ++s) {
            bool eq = true;
            for (std::size_t k = 0; k < term.tokens.size() && eq; ++k) eq = p->tokens[s + k] == term.tokens[k];
            if (eq) kc[term.text]++;
          }
        }
      }
      std::vector<TermCount> kw;
      for (const auto& [t, c] : kc) kw.push_back({t, c});
      std::stable_sort(kw.begin(), kw.end(), [](auto& a, auto& b) { return a.count > b.count; });
      if (kw.size() > q.k) kw.resize(q.k);
      if (got[fi].filter_id != filters[fi].id || got[fi].keywords != kw) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("readers never see a half-inserted post") {
  SpatialIndex idx(0.05);
  auto posts = testing::random_posts(20000, 8);
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    LensQuery q;
    while (!done) {
      auto got = idx.collect(q, nullptr);
      for (const auto& p : got) {
        if (!p || !p->geo) ++bad;
      }
      if (got.size() > idx.size()) ++bad;
    }
  });
  for (const auto& p : posts) idx.insert(p);
  done = true;
  reader.join();
  CHECK(bad == 0);
}
