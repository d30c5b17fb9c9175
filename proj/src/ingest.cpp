#include "smart/ingest.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "smart/error.hpp"

namespace smart {
namespace {

using json = nlohmann::json;

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Non-ASCII bytes are treated as word characters so UTF-8 letters survive.
bool is_word(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c >= 0x80;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

std::size_t codepoints(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

void split_word_run(std::string_view chunk, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < chunk.size()) {
    auto c = static_cast<unsigned char>(chunk[i]);
    std::size_t start = i;
    if ((c == '#' || c == '@') && i + 1 < chunk.size() &&
        is_word(static_cast<unsigned char>(chunk[i + 1]))) {
      ++i;
    } else if (!is_word(c)) {
      ++i;
      continue;
    }
    while (i < chunk.size() && is_word(static_cast<unsigned char>(chunk[i]))) ++i;
    std::string token(chunk.substr(start, i - start));
    for (char& ch : token) {
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    if (codepoints(token) >= 2) out.push_back(std::move(token));
  }
}

const json* find_field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string required_string(const json& obj, const char* name) {
  const json* v = find_field(obj, name);
  if (v == nullptr) throw Error(ErrorCode::kMissingField, name);
  if (!v->is_string()) {
    throw Error(ErrorCode::kMalformedJson, std::string(name) + " must be a string");
  }
  return v->get<std::string>();
}

std::optional<double> optional_number(const json& obj, const char* name) {
  const json* v = find_field(obj, name);
  if (v == nullptr) return std::nullopt;
  if (!v->is_number()) {
    throw Error(ErrorCode::kMalformedJson, std::string(name) + " must be a number");
  }
  return v->get<double>();
}

void check_coordinate(double value, double bound, const char* name) {
  if (!std::isfinite(value) || value < -bound || value > bound) {
    throw Error(ErrorCode::kOutOfRange, name);
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (start == i) break;
    std::string_view chunk = text.substr(start, i - start);
    if (starts_with_ci(chunk, "http://") || starts_with_ci(chunk, "https://")) continue;
    split_word_run(chunk, out);
  }
  return out;
}

Post make_post(std::string id, Timestamp ts, std::string user, std::string text,
               std::optional<GeoPoint> geo, std::optional<std::string> profile_loc) {
  if (id.empty()) throw Error(ErrorCode::kMissingField, "id");
  if (geo) {
    check_coordinate(geo->lat, 90.0, "lat");
    check_coordinate(geo->lon, 180.0, "lon");
  }
  Post post;
  post.id = std::move(id);
  post.ts = ts;
  post.user = std::move(user);
  post.tokens = tokenize(text);
  post.text = std::move(text);
  post.geo = geo;
  post.profile_loc = std::move(profile_loc);
  return post;
}

Post parse_post(std::string_view line) {
  json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw Error(ErrorCode::kMalformedJson, "expected a JSON object");
  }
  std::string id = required_string(obj, "id");
  std::string ts_text = required_string(obj, "ts");
  std::string user = required_string(obj, "user");
  std::string text = required_string(obj, "text");

  auto ts = parse_iso8601(ts_text);
  if (!ts) throw Error(ErrorCode::kBadTimestamp, ts_text);

  auto lat = optional_number(obj, "lat");
  auto lon = optional_number(obj, "lon");
  if (lat) check_coordinate(*lat, 90.0, "lat");
  if (lon) check_coordinate(*lon, 180.0, "lon");
  std::optional<GeoPoint> geo;
  if (lat && lon) geo = GeoPoint{*lat, *lon};

  std::optional<std::string> profile_loc;
  if (const json* v = find_field(obj, "profile_loc")) {
    if (!v->is_string()) throw Error(ErrorCode::kMalformedJson, "profile_loc must be a string");
    profile_loc = v->get<std::string>();
  }
  return make_post(std::move(id), *ts, std::move(user), std::move(text), geo,
                   std::move(profile_loc));
}

std::string serialize_post(const Post& post) {
  json obj = {
      {"id", post.id},
      {"ts", format_iso8601(post.ts)},
      {"user", post.user},
      {"text", post.text},
  };
  if (post.geo) {
    obj["lat"] = post.geo->lat;
    obj["lon"] = post.geo->lon;
  }
  if (post.profile_loc) obj["profile_loc"] = *post.profile_loc;
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

IngestReport ingest_stream(std::istream& in, const PostSink& sink,
                           const ReplayOptions& options) {
  using clock = std::chrono::steady_clock;
  const bool paced = options.rate && *options.rate > 0.0;
  const auto start = clock::now();

  IngestReport report;
  std::string line;
  std::size_t line_no = 0;
  std::size_t delivered = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (unsigned char c : line) {
      if (!is_space(c)) {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    try {
      Post post = parse_post(line);
      if (paced) {
        auto due = start + std::chrono::duration_cast<clock::duration>(
                               std::chrono::duration<double>(delivered / *options.rate));
        std::this_thread::sleep_until(due);
      }
      Timestamp ts = post.ts;
      sink(std::move(post));
      ++delivered;
      ++report.accepted;
      if (!report.first_ts || ts < *report.first_ts) report.first_ts = ts;
      if (!report.last_ts || ts > *report.last_ts) report.last_ts = ts;
    } catch (const Error& e) {
      ++report.rejected;
      report.errors.push_back({line_no, e.what()});
    }
  }
  // Each post owns a 1/rate slot, so N posts span N/rate seconds.
  if (paced && delivered > 0) {
    std::this_thread::sleep_until(
        start + std::chrono::duration_cast<clock::duration>(
                    std::chrono::duration<double>(delivered / *options.rate)));
  }
  return report;
}

IngestReport replay(const std::string& path, const ReplayOptions& options,
                    const PostSink& sink) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path);
  return ingest_stream(in, sink, options);
}

}  // namespace smart
