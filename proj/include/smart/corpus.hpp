#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "smart/learner.hpp"

namespace smart {

struct BoundingBox {
  double lat_min = 0.0;
  double lon_min = 0.0;
  double lat_max = 0.0;
  double lon_max = 0.0;
};

struct CorpusOptions {
  std::size_t posts = 5000;
  double relevant_frac = 0.5;
  std::uint64_t seed = 1;
  // Defaults cover the New York City area.
  BoundingBox bbox{40.48, -74.28, 40.93, -73.68};
  double geo_frac = 0.9;
  // Per-token probability of drawing from the post's own topic vocabulary,
  // and from the opposite one; the rest comes from shared filler words.
  double signal_rate = 0.5;
  double crossover_rate = 0.12;
  Timestamp start{1550577600000};  // 2019-02-19T12:00:00Z
  std::int64_t span_ms = 12 * 3600 * 1000;
};

// Throws Error(kInvalidArgument) when posts < 10 or relevant_frac is not
// strictly between 0 and 1.
void validate(const CorpusOptions& options);

// Synthetic "weather" benchmark: relevant posts draw signal words from a
// weather vocabulary, irrelevant posts from a disjoint one, both mixed with
// a shared vocabulary and some cross-over words. Exactly
// round(posts * relevant_frac) posts are relevant. Output is ts-ordered.
std::vector<GoldPost> generate_corpus(const CorpusOptions& options);

// NDJSON with an extra gold field: "label": "relevant" | "not_relevant".
void write_corpus(std::ostream& out, const std::vector<GoldPost>& corpus);

// Throws Error(kMissingField, "label") when the gold label is absent.
GoldPost parse_gold_post(std::string_view line);

// Reads a labeled corpus file. Throws Error(kFileNotFound) or the first
// parse error with its line number.
std::vector<GoldPost> load_gold_corpus(const std::string& path);

}  // namespace smart
