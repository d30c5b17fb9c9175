#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smart/ingest.hpp"
#include "smart/topics.hpp"

namespace smart {

// Running EWMA baseline of per-bin counts for one (term, scope) key.
struct BaselineState {
  double mean = 0.0;
  double var = 0.0;
  std::uint64_t n_bins = 0;
  double alpha = 0.1;
};

// mean' = (1-a)*mean + a*count; var' = (1-a)*(var + a*(count-mean)^2).
BaselineState update(const BaselineState& state, double count);

struct DetectParams {
  double z_threshold = 3.0;
  double min_count = 5.0;
  std::uint64_t warmup = 24;
};

// (count - mean) / max(sqrt(var), 1).
double z_score(const BaselineState& state, double count);

// Whether `count` is an anomaly against `state`. Evaluate before update().
bool is_anomalous(const BaselineState& state, double count, const DetectParams& params);

inline constexpr std::size_t kMaxSamples = 5;

struct AnomalyEvent {
  std::string term;
  std::string scope;  // "global" or "cell:<row>:<col>"
  Timestamp bin_start;
  std::size_t count = 0;
  double z = 0.0;
  std::vector<std::string> samples;  // at most kMaxSamples post ids
};

std::optional<AnomalyEvent> detect(const BaselineState& state, const std::string& term,
                                   const std::string& scope, Timestamp bin_start,
                                   std::size_t count, const DetectParams& params,
                                   std::vector<std::string> samples = {});

struct TermBin {
  std::size_t count = 0;
  std::vector<std::string> samples;
};

// scope -> term -> count for one closed bin.
using BinCounts = std::map<std::string, std::map<std::string, TermBin>>;

inline const std::string kGlobalScope = "global";
std::string cell_scope(std::int64_t row, std::int64_t col);

// Owns the baselines for every (term, scope) key. Bins must arrive in
// strictly increasing order.
class BurstDetector {
 public:
  explicit BurstDetector(DetectParams params = {}, double alpha = 0.1);

  // Detect-then-update for every key seen now or before; absent keys get a
  // zero count. Events are sorted by z descending, then scope, then term.
  // Throws Error(kBinOutOfOrder) when bin_start does not advance.
  std::vector<AnomalyEvent> scan_bin(Timestamp bin_start, const BinCounts& counts);

  std::optional<Timestamp> last_bin() const { return last_bin_; }
  std::size_t state_count() const { return states_.size(); }
  const BaselineState* state(const std::string& term, const std::string& scope) const;
  const DetectParams& params() const { return params_; }

 private:
  DetectParams params_;
  double alpha_;
  std::optional<Timestamp> last_bin_;
  std::map<std::pair<std::string, std::string>, BaselineState> states_;  // (scope, term)
};

// Buckets a post stream into epoch-aligned bins and feeds each closed bin
// (including empty gaps) to a BurstDetector. Terms are distinct tokens per
// post minus stopwords; scopes are global plus the post's grid cell.
// Posts older than the open bin are ignored.
class TermBurstMonitor {
 public:
  TermBurstMonitor(std::int64_t bin_width_ms, double grid_res, DetectParams params = {},
                   double alpha = 0.1, const Stopwords* stopwords = &Stopwords::builtin());

  // Returns events from any bins closed by this post's arrival.
  std::vector<AnomalyEvent> observe(const Post& post);

  // Closes every bin that ends at or before `now`.
  std::vector<AnomalyEvent> advance_to(Timestamp now);

  std::size_t late_posts() const { return late_; }
  const BurstDetector& detector() const { return detector_; }

 private:
  std::vector<AnomalyEvent> close_through(std::int64_t bin_index);

  std::int64_t width_;
  double res_;
  const Stopwords* stopwords_;
  BurstDetector detector_;
  std::optional<std::int64_t> open_bin_;
  BinCounts open_counts_;
  std::size_t late_ = 0;
};

}  // namespace smart
