#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smart/ingest.hpp"

namespace smart {

class Stopwords {
 public:
  Stopwords() = default;
  explicit Stopwords(std::set<std::string, std::less<>> words) : words_(std::move(words)) {}

  // The built-in English list (data/stopwords.txt).
  static const Stopwords& builtin();
  // One lowercase token per line; blank lines ignored.
  static Stopwords load(const std::string& path);

  bool contains(std::string_view token) const { return words_.contains(token); }
  std::size_t size() const { return words_.size(); }
  const std::set<std::string, std::less<>>& words() const { return words_; }

 private:
  std::set<std::string, std::less<>> words_;
};

inline constexpr std::string_view kStopwordsVersion = "en-v1";

struct TermCount {
  std::string term;
  std::size_t count = 0;

  friend bool operator==(const TermCount&, const TermCount&) = default;
};

// Exact token frequencies over `posts`, dropping tokens in `drop` when it
// is non-null. Top `k` by count, ties lexicographically ascending.
// Throws Error(kInvalidArgument) when k == 0.
std::vector<TermCount> top_terms(std::span<const PostPtr> posts, std::size_t k,
                                 const Stopwords* drop = nullptr);

// Word-cloud weight: count divided by the largest count in the list.
std::vector<double> cloud_weights(std::span<const TermCount> terms);

struct WeightedTerm {
  std::string term;
  double weight = 0.0;
};

struct TopicSummary {
  std::size_t topic_id = 0;
  // Ranked by weight (ties lexicographic). Holds the full distribution
  // unless truncated by the producer.
  std::vector<WeightedTerm> terms;
  std::size_t support = 0;
};

struct LdaParams {
  std::size_t topics = 5;
  double alpha = 0.1;
  double beta = 0.01;
  int iterations = 200;
  std::uint64_t seed = 1;
};

struct LdaResult {
  std::vector<TopicSummary> topics;
  // Per fitted document (posts with at least one kept token, input order),
  // the final topic of every token.
  std::vector<std::vector<std::uint32_t>> assignments;
};

// Collapsed Gibbs sampling. Topic-term weights are (n_kw + beta) /
// (n_k + V*beta); support counts documents whose most probable topic is k.
// Throws Error(kCorpusTooSmall) when fewer than K distinct non-empty
// documents remain, Error(kInvalidArgument) on invalid params.
LdaResult lda_fit(std::span<const PostPtr> posts, const LdaParams& params,
                  const Stopwords* drop = nullptr);

struct BurstTerm {
  std::string term;
  std::size_t current = 0;
  std::size_t baseline = 0;
  double score = 0.0;  // (current + 1) / (baseline + 1)
};

// Terms of the current window ranked by burstiness, then current count
// (descending), then term.
std::vector<BurstTerm> burstiness(std::span<const PostPtr> current,
                                  std::span<const PostPtr> baseline,
                                  const Stopwords* drop = nullptr);

// Topics of `current` weighted by burstiness against `baseline`, each
// truncated to `k` terms. Uses lda_fit when the window is large enough,
// else a single burst-ranked summary. Empty current window gives [].
std::vector<TopicSummary> trending_topics(std::span<const PostPtr> current,
                                          std::span<const PostPtr> baseline, std::size_t k,
                                          const LdaParams& params = {},
                                          const Stopwords* drop = nullptr);

}  // namespace smart
