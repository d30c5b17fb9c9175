#pragma once

#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smart/time.hpp"

namespace smart {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// One ingested geomessage. Immutable once built by parse_post / make_post;
// `tokens` always equals tokenize(text).
struct Post {
  std::string id;
  Timestamp ts;
  std::string user;
  std::string text;
  std::optional<GeoPoint> geo;
  std::optional<std::string> profile_loc;
  std::vector<std::string> tokens;

  friend bool operator==(const Post&, const Post&) = default;
};

using PostPtr = std::shared_ptr<const Post>;

// Lowercases, drops whitespace-delimited http:// and https:// tokens, keeps
// '#'/'@' attached to the following word, splits on all other punctuation
// and drops tokens shorter than two characters.
std::vector<std::string> tokenize(std::string_view text);

// Builds a validated post and fills its token cache. Throws Error
// (kMissingField / kOutOfRange) on invalid input.
Post make_post(std::string id, Timestamp ts, std::string user, std::string text,
               std::optional<GeoPoint> geo = std::nullopt,
               std::optional<std::string> profile_loc = std::nullopt);

// Parses one NDJSON record. Throws Error with kMalformedJson, kMissingField,
// kOutOfRange or kBadTimestamp.
Post parse_post(std::string_view line);

// Inverse of parse_post (single line, no trailing newline).
std::string serialize_post(const Post& post);

struct IngestError {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::optional<Timestamp> first_ts;
  std::optional<Timestamp> last_ts;
  std::vector<IngestError> errors;

  std::size_t lines_read() const { return accepted + rejected; }
};

// Receives each accepted post. A sink may throw smart::Error to reject a
// post (e.g. a duplicate id); the record is then counted as rejected.
using PostSink = std::function<void(Post)>;

struct ReplayOptions {
  // Posts per second; nullopt or <= 0 means unlimited.
  std::optional<double> rate;
};

// Reads NDJSON records from `in` in order. Blank lines are skipped and do
// not count as records.
IngestReport ingest_stream(std::istream& in, const PostSink& sink,
                           const ReplayOptions& options = {});

// Throws Error(kFileNotFound) when the file cannot be opened.
IngestReport replay(const std::string& path, const ReplayOptions& options,
                    const PostSink& sink);

}  // namespace smart
