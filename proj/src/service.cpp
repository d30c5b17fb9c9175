#include "smart/service.hpp"

#include <charconv>
#include <sstream>

#include <httplib.h>

#include "smart/codec.hpp"
#include "smart/error.hpp"

namespace smart {
namespace {

using json = nlohmann::json;
using httplib::Request;
using httplib::Response;

void send(Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Parameter problems carry the parameter name.
[[noreturn]] void bad_param(const std::string& name, const std::string& why) {
  throw Error(ErrorCode::kInvalidArgument, name + ": " + why);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownPost:
    case ErrorCode::kUnknownFilter:
    case ErrorCode::kUnknownModel:
      return 404;
    case ErrorCode::kDuplicateId:
      return 409;
    case ErrorCode::kCorpusTooSmall:
      return 422;
    case ErrorCode::kIoError:
    case ErrorCode::kCorruptSnapshot:
    case ErrorCode::kFileNotFound:
      return 500;
    default:
      return 400;
  }
}

void send_error(Response& res, const Error& e, int status = 0) {
  json body = {{"error", std::string(to_string(e.code()))}, {"message", e.detail()}};
  if (e.code() == ErrorCode::kInvalidArgument) {
    const auto& d = e.detail();
    body["param"] = d.substr(0, d.find_first_of(": "));
  }
  send(res, status ? status : status_for(e.code()), body);
}

std::optional<std::string> param(const Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::vector<double> numbers(const std::string& text, const char* name, std::size_t expected) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    double v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || p != part.data() + part.size() || !std::isfinite(v)) {
      bad_param(name, "expected " + std::to_string(expected) + " comma-separated numbers");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() != expected) {
    bad_param(name, "expected " + std::to_string(expected) + " comma-separated numbers");
  }
  return out;
}

std::uint64_t unsigned_param(const Request& req, const char* name, std::uint64_t fallback,
                             std::uint64_t min, std::uint64_t max) {
  auto v = param(req, name);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (v->empty() || ec != std::errc() || p != v->data() + v->size() || out < min || out > max) {
    bad_param(name, "expected an integer in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
  }
  return out;
}

std::optional<Timestamp> time_param(const Request& req, const char* name) {
  auto v = param(req, name);
  if (!v) return std::nullopt;
  auto ts = parse_iso8601(*v);
  if (!ts) bad_param(name, "expected an ISO-8601 timestamp");
  return ts;
}

// bbox=lat_min,lon_min,lat_max,lon_max or circle=lat,lon,radius_m.
std::optional<Region> region_param(const Request& req) {
  auto bbox = param(req, "bbox");
  auto circle = param(req, "circle");
  if (bbox && circle) bad_param("bbox", "give either bbox or circle, not both");
  if (bbox) {
    auto v = numbers(*bbox, "bbox", 4);
    return BBox{v[0], v[1], v[2], v[3]};
  }
  if (circle) {
    auto v = numbers(*circle, "circle", 3);
    return Circle{GeoPoint{v[0], v[1]}, v[2]};
  }
  return std::nullopt;
}

LensQuery lens_query(const Request& req) {
  LensQuery q;
  if (auto r = region_param(req)) q.region = *r;
  if (auto t = time_param(req, "from")) q.from = *t;
  if (auto t = time_param(req, "to")) q.to = *t;
  if (auto f = param(req, "filter")) q.filter_id = *f;
  q.k = unsigned_param(req, "k", 10, 1, 10000);
  validate(q);
  return q;
}

json ranked_json(const RankedPost& r, bool with_score) {
  json j = codec::post_json(*r.post);
  if (with_score) j["score"] = codec::score_json(r.score);
  return j;
}

json posts_json(std::span<const PostPtr> posts) {
  json arr = json::array();
  for (const auto& p : posts) arr.push_back(codec::post_json(*p));
  return arr;
}

json parse_body(const Request& req) {
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kMalformedJson, "request body");
  return j;
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const Request& req, Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

std::string sse_frame(const PushEvent& e) {
  std::string out = "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: ";
  out += json{{"seq", e.seq}, {"type", e.type}, {"payload", e.payload}}.dump();
  out += "\n\n";
  return out;
}

}  // namespace

Service::Service(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
  // The library default adds SO_REUSEPORT, which lets a second server
  // share a port instead of failing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  routes();
}

Service::~Service() { stop(); }

void Service::routes() {
  auto& s = *server_;
  Engine& eng = engine_;

  s.Get("/health", guarded([&eng](const Request&, Response& res) {
          send(res, 200, {{"status", "ok"}, {"posts", eng.post_count()}, {"filters", eng.filters().size()}});
        }));

  auto upsert = [&eng](const Request& req, Response& res, std::optional<std::string> path_id) {
    json body = parse_body(req);
    if (path_id) {
      if (!body.is_object()) throw Error(ErrorCode::kInvalidFilter, "expected a JSON object");
      if (body.contains("id") && body["id"] != *path_id) {
        throw Error(ErrorCode::kInvalidFilter, "id in body does not match path");
      }
      body["id"] = *path_id;
    }
    StoredFilter stored = eng.upsert_filter(codec::filter_def_from_json(body));
    send(res, stored.version == 1 ? 201 : 200, codec::stored_filter_json(stored));
  };
  s.Post("/filters", guarded([upsert](const Request& req, Response& res) { upsert(req, res, std::nullopt); }));
  s.Put(R"(/filters/([^/]+))", guarded([upsert](const Request& req, Response& res) {
          upsert(req, res, req.matches[1].str());
        }));
  s.Get("/filters", guarded([&eng](const Request&, Response& res) {
          json arr = json::array();
          for (const auto& f : eng.filters()) arr.push_back(codec::stored_filter_json(f));
          send(res, 200, {{"filters", std::move(arr)}});
        }));

  s.Post("/ingest", guarded([&eng](const Request& req, Response& res) {
           std::istringstream in(req.body);
           IngestReport r = eng.ingest(in);
           json errors = json::array();
           for (const auto& e : r.errors) errors.push_back({{"line", e.line}, {"reason", e.reason}});
           send(res, 200, {{"accepted", r.accepted}, {"rejected", r.rejected}, {"errors", std::move(errors)}});
         }));

  s.Get("/posts", guarded([&eng](const Request& req, Response& res) {
          PostsQuery q;
          if (auto f = param(req, "filter")) q.filter_id = *f;
          auto sort = param(req, "sort").value_or(q.filter_id ? "relevance" : "time");
          if (sort == "relevance") {
            q.sort = PostSort::kRelevance;
            if (!q.filter_id) bad_param("sort", "relevance needs a filter");
          } else if (sort == "time") {
            q.sort = PostSort::kTime;
          } else {
            bad_param("sort", "expected relevance or time");
          }
          auto order = param(req, "order").value_or("desc");
          if (order != "desc" && order != "asc") bad_param("order", "expected asc or desc");
          q.order = order == "asc" ? SortOrder::kAscending : SortOrder::kDescending;
          q.region = region_param(req);
          if (auto t = time_param(req, "from")) q.from = *t;
          if (auto t = time_param(req, "to")) q.to = *t;
          if (!(q.from < q.to)) bad_param("from", "must be before to");
          q.limit = unsigned_param(req, "limit", 100, 1, kMaxPageSize);
          q.offset = unsigned_param(req, "offset", 0, 0, std::numeric_limits<std::uint32_t>::max());
          PostsPage page = eng.query_posts(q);
          json arr = json::array();
          for (const auto& r : page.posts) arr.push_back(ranked_json(r, q.filter_id.has_value()));
          json body = {{"total", page.total}, {"offset", q.offset}, {"limit", q.limit}, {"posts", std::move(arr)}};
          body["filter"] = q.filter_id ? json(*q.filter_id) : json(nullptr);
          body["model_version"] = page.model_version ? json(*page.model_version) : json(nullptr);
          send(res, 200, body);
        }));

  s.Post("/labels", guarded([&eng](const Request& req, Response& res) {
           json body = parse_body(req);
           if (body.is_object() && !body.contains("ts")) {
             auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch());
             body["ts"] = format_iso8601(Timestamp{now.count()});
           }
           LabelRecord label;
           try {
             label = codec::label_from_json(body);
           } catch (const Error& e) {
             // An unrecognized class is well-formed but unprocessable.
             if (e.code() == ErrorCode::kInvalidArgument) {
               send(res, 422, {{"error", "InvalidArgument"}, {"param", "class"}, {"message", e.detail()}});
               return;
             }
             throw;
           }
           LabelOutcome out = eng.add_label(label);
           send(res, 201, {{"filter_id", out.filter_id}, {"version", out.version}, {"n_labels", out.n_labels}});
         }));
  s.Get("/labels", guarded([&eng](const Request& req, Response& res) {
          auto f = param(req, "filter");
          if (!f) bad_param("filter", "required");
          eng.model(*f);  // 404 for an unknown filter
          json arr = json::array();
          for (const auto& l : eng.labels(*f)) arr.push_back(codec::label_json(l));
          send(res, 200, {{"labels", std::move(arr)}});
        }));

  s.Get("/lens/content", guarded([&eng](const Request& req, Response& res) {
          auto terms = eng.content_lens(lens_query(req));
          send(res, 200, {{"terms", codec::term_counts_json(terms)},
                          {"stopwords", std::string(kStopwordsVersion)}});
        }));
  s.Get("/lens/cluster", guarded([&eng](const Request& req, Response& res) {
          json arr = json::array();
          for (const auto& fk : eng.cluster_lens(lens_query(req))) {
            arr.push_back({{"filter_id", fk.filter_id}, {"keywords", codec::term_counts_json(fk.keywords)}});
          }
          send(res, 200, {{"filters", std::move(arr)}});
        }));
  s.Get("/lens/topics", guarded([&eng](const Request& req, Response& res) {
          LensQuery q = lens_query(req);
          LdaParams params;
          params.topics = unsigned_param(req, "K", 5, 1, 100);
          auto topics = eng.topics_lens(q, params);
          json arr = json::array();
          for (const auto& t : topics) arr.push_back(codec::topic_json(t, q.k));
          send(res, 200, {{"topics", std::move(arr)}});
        }));

  s.Get("/themeriver", guarded([&eng](const Request& req, Response& res) {
          std::optional<std::int64_t> width;
          if (req.has_param("bin")) {
            width = static_cast<std::int64_t>(unsigned_param(req, "bin", 0, 1, 366ull * 86400)) * 1000;
          }
          auto river = eng.theme_river(width, time_param(req, "from"), time_param(req, "to"));
          send(res, 200, codec::river_json(river));
        }));
  s.Get("/themeriver/drilldown", guarded([&eng](const Request& req, Response& res) {
          auto f = param(req, "filter");
          if (!f) bad_param("filter", "required");
          auto start = time_param(req, "bin_start");
          if (!start) bad_param("bin_start", "required");
          std::optional<std::int64_t> width;
          if (req.has_param("bin")) {
            width = static_cast<std::int64_t>(unsigned_param(req, "bin", 0, 1, 366ull * 86400)) * 1000;
          }
          send(res, 200, {{"posts", posts_json(eng.drill_down(*f, *start, width))}});
        }));

  s.Get("/anomalies", guarded([&eng](const Request& req, Response& res) {
          json arr = json::array();
          for (const auto& e : eng.anomalies(time_param(req, "since"))) arr.push_back(codec::anomaly_json(e));
          send(res, 200, {{"anomalies", std::move(arr)}});
        }));
  s.Get("/trending", guarded([&eng](const Request& req, Response& res) {
          auto window = static_cast<std::int64_t>(unsigned_param(req, "window", 3600, 1, 366ull * 86400));
          auto k = unsigned_param(req, "k", 10, 1, 1000);
          json arr = json::array();
          for (const auto& t : eng.trending(window * 1000, k)) arr.push_back(codec::topic_json(t, k));
          send(res, 200, {{"topics", std::move(arr)}});
        }));

  std::atomic<bool>* stopping = &stopping_;
  s.Get("/stream", [&eng, stopping](const Request&, Response& res) {
    auto sub = eng.events().subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [sub, stopping, first = true](std::size_t, httplib::DataSink& sink) mutable {
          if (first) {
            first = false;
            return sink.write(": connected\n\n", 13);
          }
          if (stopping->load()) {
            sink.done();
            return true;
          }
          auto e = sub->next(std::chrono::milliseconds(500));
          if (!e) {
            if (sub->finished()) {
              sink.done();
              return true;
            }
            return sink.write(": keepalive\n\n", 13);
          }
          std::string frame = sse_frame(*e);
          if (!sink.write(frame.data(), frame.size())) return false;
          if (e->type == "dropped") sink.done();
          return true;
        },
        [sub](bool) { sub->close(); });
  });
}

int Service::bind(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kPortInUse, host + ":" + std::to_string(port));
  return bound;
}

void Service::run() { server_->listen_after_bind(); }

void Service::stop() {
  stopping_ = true;
  engine_.events().close_all();
  if (server_) server_->stop();
}

bool Service::running() const { return server_->is_running(); }

}  // namespace smart
