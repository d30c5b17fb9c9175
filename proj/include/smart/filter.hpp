#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace smart {

// A tokenized keyword or phrase (1..5 tokens). `text` is the normalized
// form: tokens joined by single spaces.
struct Term {
  std::vector<std::string> tokens;
  std::string text;

  friend bool operator==(const Term& a, const Term& b) { return a.tokens == b.tokens; }
};

inline constexpr std::size_t kMaxPhraseTokens = 5;

// Raw filter definition as supplied by an operator.
struct FilterDef {
  std::string id;
  std::string name;
  std::vector<std::string> include;
  std::vector<std::string> exclude;
};

// Validated "Tweet classifier". Terms keep definition order; duplicates
// are removed.
struct KeywordFilter {
  std::string id;
  std::string name;
  std::vector<Term> include;
  std::vector<Term> exclude;
};

// Tokenizes and validates. Throws Error(kInvalidFilter) on an id outside
// [A-Za-z0-9_.-] (or empty, or leading '.'), an empty or over-long term,
// or include/exclude overlap.
KeywordFilter compile_filter(const FilterDef& def);

FilterDef to_def(const KeywordFilter& filter);

// True iff some include term occurs as a contiguous token run and no
// exclude term does. Empty include matches nothing.
bool matches(const KeywordFilter& filter, std::span<const std::string> tokens);

// Include terms present in `tokens`, in definition order, with occurrence
// counts (overlapping runs count separately). Empty when matches() is false.
std::vector<std::pair<std::string, std::size_t>> matched_terms(
    const KeywordFilter& filter, std::span<const std::string> tokens);

struct StoredFilter {
  KeywordFilter filter;
  std::uint64_t version = 0;
};

using FilterSnapshot = std::shared_ptr<const std::map<std::string, StoredFilter>>;

// Versioned filter set. Readers take an immutable snapshot; upsert
// publishes a new one.
class FilterRegistry {
 public:
  FilterRegistry();

  // Returns the stored filter with its new version (1 for a new id).
  StoredFilter upsert(const FilterDef& def);

  // Replaces the whole set, keeping the given versions (used on reload).
  void restore(std::vector<StoredFilter> filters);

  FilterSnapshot snapshot() const;

  // Ids in lexicographic order.
  std::vector<StoredFilter> list() const;

 private:
  mutable std::mutex mu_;
  FilterSnapshot current_;
};

}  // namespace smart
