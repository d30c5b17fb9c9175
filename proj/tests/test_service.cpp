#include <doctest.h>
#include <httplib.h>

#include <sstream>
#include <thread>

#include "smart/codec.hpp"
#include "smart/engine.hpp"
#include "smart/error.hpp"
#include "smart/service.hpp"
#include "smart/time.hpp"
#include "support.hpp"

using namespace smart;
using nlohmann::json;

namespace {

struct Server {
  Engine engine;
  Service service;
  int port = 0;
  std::thread thread;

  explicit Server(Config c = {}) : engine(std::move(c)), service(engine) {
    port = service.bind("127.0.0.1", 0);
    thread = std::thread([this] { service.run(); });
    while (!service.running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  ~Server() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    return c;
  }
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::string ndjson(const std::vector<PostPtr>& posts) {
  std::string s;
  for (const auto& p : posts) s += codec::post_json(*p).dump() + "\n";
  return s;
}

void load(Server& s, const std::vector<PostPtr>& posts) {
  auto c = s.client();
  auto r = c.Post("/ingest", ndjson(posts), "application/x-ndjson");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  REQUIRE(body_of(r)["accepted"] == posts.size());
}

void add_filter(Server& s, const json& def) {
  auto c = s.client();
  auto r = c.Post("/filters", def.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status / 100 == 2);
}

std::vector<std::string> ids_of(const json& posts) {
  std::vector<std::string> out;
  for (const auto& p : posts) out.push_back(p["id"]);
  return out;
}

}  // namespace

TEST_CASE("health, filters and status codes") {
  Server s;
  auto c = s.client();
  auto h = body_of(c.Get("/health"));
  CHECK(h["status"] == "ok");
  CHECK(h["posts"] == 0);

  json def = {{"id", "wx"}, {"name", "Weather"}, {"include", {"snow", "rain"}}, {"exclude", json::array()}};
  auto r = c.Post("/filters", def.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  CHECK(body_of(r)["version"] == 1);
  r = c.Post("/filters", def.dump(), "application/json");
  CHECK(r->status == 200);
  CHECK(body_of(r)["version"] == 2);
  r = c.Put("/filters/traffic", json{{"include", {"crash"}}}.dump(), "application/json");
  CHECK(r->status == 201);
  r = c.Put("/filters/traffic", json{{"id", "other"}, {"include", {"crash"}}}.dump(), "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["error"] == "InvalidFilter");
  r = c.Post("/filters", "{broken", "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["error"] == "MalformedJson");

  auto list = body_of(c.Get("/filters"))["filters"];
  REQUIRE(list.size() == 2);
  CHECK(list[0]["id"] == "traffic");
  CHECK(list[1]["id"] == "wx");
  CHECK(c.Get("/nope")->status == 404);
}

TEST_CASE("ingest reports rejected lines and duplicates") {
  Server s;
  auto c = s.client();
  std::string body = R"({"id":"a","ts":"2019-02-19T12:00:00Z","user":"u","text":"snow here"})"
                     "\nnot json\n"
                     R"({"id":"a","ts":"2019-02-19T12:00:00Z","user":"u","text":"again"})"
                     "\n"
                     R"({"id":"b","ts":"2019-02-19T12:00:01Z","user":"u","text":"snow","lat":40.7,"lon":-74.0})"
                     "\n";
  auto j = body_of(c.Post("/ingest", body, "application/x-ndjson"));
  CHECK(j["accepted"] == 2);
  CHECK(j["rejected"] == 2);
  REQUIRE(j["errors"].size() == 2);
  CHECK(j["errors"][0]["line"] == 2);
  CHECK(j["errors"][1]["line"] == 3);
  CHECK(s.engine.post_count() == 2);
}

TEST_CASE("posts endpoint mirrors the engine") {
  Server s;
  auto posts = testing::random_posts(1500, 60);
  load(s, posts);
  add_filter(s, {{"id", "wx"}, {"include", {"snow", "rain", "#wx"}}});
  auto c = s.client();
  for (std::size_t i = 0; i < 5; ++i) {
    json label = {{"post_id", posts[i]->id}, {"filter_id", "wx"}, {"class", i % 2 ? "not_relevant" : "relevant"}};
    auto r = c.Post("/labels", label.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 201);
    CHECK(body_of(r)["version"] == i + 2);
  }

  auto j = body_of(c.Get("/posts?filter=wx&limit=200&offset=10&bbox=40.1,-74.4,40.9,-73.6"));
  PostsQuery q;
  q.filter_id = "wx";
  q.limit = 200;
  q.offset = 10;
  q.region = BBox{40.1, -74.4, 40.9, -73.6};
  auto page = s.engine.query_posts(q);
  CHECK(j["total"] == page.total);
  CHECK(j["model_version"] == 6);
  REQUIRE(j["posts"].size() == page.posts.size());
  for (std::size_t i = 0; i < page.posts.size(); ++i) {
    CHECK(j["posts"][i]["id"] == page.posts[i].post->id);
    CHECK(j["posts"][i]["score"]["p_rel"].get<double>() == page.posts[i].score.p_rel);
  }

  auto t = body_of(c.Get("/posts?sort=time&order=asc&circle=40.5,-74,20000&from=2019-02-20T00:00:00Z"));
  PostsQuery tq;
  tq.sort = PostSort::kTime;
  tq.order = SortOrder::kAscending;
  tq.region = Circle{{40.5, -74}, 20000};
  tq.from = *parse_iso8601("2019-02-20T00:00:00Z");
  std::vector<std::string> want;
  for (const auto& r : s.engine.query_posts(tq).posts) want.push_back(r.post->id);
  CHECK(ids_of(t["posts"]) == want);
  CHECK(t["filter"].is_null());
  CHECK_FALSE(t["posts"][0].contains("score"));

  auto labels = body_of(c.Get("/labels?filter=wx"))["labels"];
  CHECK(labels.size() == 5);
  CHECK(labels[0]["post_id"] == posts[0]->id);
}

TEST_CASE("bad parameters answer 400 naming the parameter") {
  Server s;
  load(s, testing::random_posts(50, 61));
  add_filter(s, {{"id", "wx"}, {"include", {"snow"}}});
  auto c = s.client();
  auto param_of = [&](const std::string& path) {
    auto r = c.Get(path);
    REQUIRE(r);
    CHECK(r->status == 400);
    return body_of(r)["param"].get<std::string>();
  };
  CHECK(param_of("/posts?bbox=41,-74,40,-73") == "bbox");
  CHECK(param_of("/posts?bbox=1,2,3") == "bbox");
  CHECK(param_of("/posts?circle=40,-74,0") == "circle");
  CHECK(param_of("/posts?limit=0") == "limit");
  CHECK(param_of("/posts?limit=1001") == "limit");
  CHECK(param_of("/posts?sort=relevance") == "sort");
  CHECK(param_of("/posts?order=sideways") == "order");
  CHECK(param_of("/posts?from=yesterday") == "from");
  CHECK(param_of("/lens/content?k=0") == "k");
  CHECK(param_of("/lens/content?bbox=a,b,c,d") == "bbox");
  CHECK(param_of("/themeriver?bin=0") == "bin");
  CHECK(param_of("/themeriver/drilldown?filter=wx") == "bin_start");

  CHECK(c.Get("/posts?filter=ghost")->status == 404);
  CHECK(c.Get("/labels?filter=ghost")->status == 404);
  CHECK(c.Get("/themeriver/drilldown?filter=ghost&bin_start=2019-02-19T12:00:00Z")->status == 404);

  json label = {{"post_id", "q000000"}, {"filter_id", "wx"}, {"class", "maybe"}};
  auto r = c.Post("/labels", label.dump(), "application/json");
  CHECK(r->status == 422);
  CHECK(body_of(r)["param"] == "class");
  label["class"] = "relevant";
  label["post_id"] = "ghost";
  CHECK(c.Post("/labels", label.dump(), "application/json")->status == 404);
  label.erase("post_id");
  CHECK(c.Post("/labels", label.dump(), "application/json")->status == 400);

  auto dup = c.Post("/ingest", ndjson({testing::random_posts(1, 61)[0]}), "application/x-ndjson");
  CHECK(body_of(dup)["rejected"] == 1);
}

TEST_CASE("lens, river, anomaly and trending endpoints mirror the engine") {
  Server s;
  auto posts = testing::random_posts(2000, 62);
  load(s, posts);
  add_filter(s, {{"id", "wx"}, {"include", {"snow", "rain"}}});
  add_filter(s, {{"id", "traffic"}, {"include", {"traffic", "crash"}}});
  auto c = s.client();

  LensQuery lq;
  lq.region = BBox{40.0, -74.5, 40.5, -74.0};
  lq.k = 7;
  auto content = body_of(c.Get("/lens/content?bbox=40.0,-74.5,40.5,-74.0&k=7"));
  CHECK(content["terms"] == codec::term_counts_json(s.engine.content_lens(lq)));
  CHECK(content["stopwords"] == "en-v1");

  auto cluster = body_of(c.Get("/lens/cluster?bbox=40.0,-74.5,40.5,-74.0&k=7"));
  auto ck = s.engine.cluster_lens(lq);
  REQUIRE(cluster["filters"].size() == ck.size());
  for (std::size_t i = 0; i < ck.size(); ++i) {
    CHECK(cluster["filters"][i]["filter_id"] == ck[i].filter_id);
    CHECK(cluster["filters"][i]["keywords"] == codec::term_counts_json(ck[i].keywords));
  }

  auto topics = body_of(c.Get("/lens/topics?K=3&k=4"));
  REQUIRE(topics["topics"].size() == 3);
  CHECK(topics["topics"][0]["terms"].size() <= 4);

  auto river = body_of(c.Get("/themeriver?bin=7200"));
  CHECK(river == codec::river_json(s.engine.theme_river(7200 * 1000, std::nullopt, std::nullopt)));
  std::string bin0 = river["bins"][2];
  auto drill = body_of(c.Get("/themeriver/drilldown?filter=wx&bin=7200&bin_start=" + bin0));
  CHECK(drill["posts"].size() == river["series"]["wx"][2]);

  CHECK(body_of(c.Get("/anomalies"))["anomalies"].is_array());
  auto trend = body_of(c.Get("/trending?window=21600&k=5"));
  CHECK(trend["topics"].size() == s.engine.trending(21600 * 1000, 5).size());
}

TEST_CASE("stream delivers post and score events in order") {
  Server s;
  auto posts = testing::random_posts(20, 63);
  load(s, posts);
  add_filter(s, {{"id", "wx"}, {"include", {"snow", "rain"}}});

  std::string received;
  std::mutex mu;
  std::atomic<bool> connected{false};
  std::atomic<bool> enough{false};
  std::thread reader([&] {
    auto c = s.client();
    c.Get("/stream", [&](const char* data, std::size_t n) {
      std::lock_guard lock(mu);
      received.append(data, n);
      if (received.find(": connected") != std::string::npos) connected = true;
      return !enough.load();
    });
  });
  while (!connected) std::this_thread::sleep_for(std::chrono::milliseconds(1));

  auto c = s.client();
  for (std::size_t i = 0; i < 3; ++i) {
    json label = {{"post_id", posts[i]->id}, {"filter_id", "wx"}, {"class", "relevant"}};
    c.Post("/labels", label.dump(), "application/json");
  }
  auto extra = make_post("late1", Timestamp{1550577600000}, "u", "fresh snow");
  c.Post("/ingest", codec::post_json(extra).dump() + "\n", "application/x-ndjson");

  for (int i = 0; i < 400; ++i) {
    {
      std::lock_guard lock(mu);
      if (received.find("late1") != std::string::npos) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  enough = true;
  reader.join();

  std::vector<std::pair<std::uint64_t, std::string>> events;
  std::istringstream in(received);
  for (std::string line; std::getline(in, line);) {
    if (line.starts_with("data: ")) {
      auto j = json::parse(line.substr(6));
      events.emplace_back(j["seq"].get<std::uint64_t>(), j["type"].get<std::string>());
      if (j["type"] == "scores_updated") CHECK(j["payload"]["filter_id"] == "wx");
      if (j["type"] == "post") CHECK(j["payload"]["filters"] == json::array({"wx"}));
    }
  }
  REQUIRE(events.size() == 4);
  for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i].first == events[i - 1].first + 1);
  CHECK(events[0].second == "scores_updated");
  CHECK(events[3].second == "post");
}

TEST_CASE("binding a taken port fails cleanly") {
  Server s;
  Engine other{Config{}};
  Service second(other);
  CHECK_THROWS_WITH_AS(second.bind("127.0.0.1", s.port), doctest::Contains("PortInUse"), Error);
}
