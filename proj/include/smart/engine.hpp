#pragma once

#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "smart/anomaly.hpp"
#include "smart/config.hpp"
#include "smart/events.hpp"
#include "smart/filter.hpp"
#include "smart/ingest.hpp"
#include "smart/learner.hpp"
#include "smart/spatial.hpp"
#include "smart/store.hpp"
#include "smart/temporal.hpp"
#include "smart/topics.hpp"

namespace smart {

enum class PostSort { kRelevance, kTime };

struct PostsQuery {
  std::optional<std::string> filter_id;
  std::optional<Region> region;  // absent: every post, geolocated or not
  Timestamp from{std::numeric_limits<std::int64_t>::min()};
  Timestamp to{std::numeric_limits<std::int64_t>::max()};
  PostSort sort = PostSort::kRelevance;
  SortOrder order = SortOrder::kDescending;
  std::size_t limit = 100;
  std::size_t offset = 0;
};

inline constexpr std::size_t kMaxPageSize = 1000;

struct PostsPage {
  std::size_t total = 0;
  std::optional<std::uint64_t> model_version;
  // Scores are present when a filter was given.
  std::vector<RankedPost> posts;
};

struct LabelOutcome {
  std::string filter_id;
  std::uint64_t version = 0;
  std::uint64_t n_labels = 0;
};

// In-process service state: the post store and every derived structure,
// plus optional persistence. All methods are thread-safe.
class Engine {
 public:
  // Loads existing state when config.data_dir is set.
  explicit Engine(Config config, const TrainOptions& train = {});
  ~Engine();

  const Config& config() const { return config_; }
  EventHub& events() { return events_; }
  const std::vector<std::string>& load_warnings() const { return load_warnings_; }

  StoredFilter upsert_filter(const FilterDef& def);
  std::vector<StoredFilter> filters() const { return registry_.list(); }
  FilterSnapshot filter_snapshot() const { return registry_.snapshot(); }

  // Throws Error(kDuplicateId) and persistence errors.
  void add_post(Post post);
  IngestReport ingest(std::istream& ndjson);

  // Throws Error(kUnknownFilter) / Error(kUnknownPost).
  LabelOutcome add_label(LabelRecord label);

  std::shared_ptr<const ModelState> model(const std::string& filter_id) const;
  std::vector<LabelRecord> labels(const std::string& filter_id) const;

  PostPtr find_post(const std::string& id) const;
  std::vector<PostPtr> posts() const;  // ingest order
  std::size_t post_count() const;
  const SpatialIndex& index() const { return index_; }

  // Throws Error(kUnknownFilter) when query.filter_id names no filter,
  // Error(kInvalidArgument) for a relevance sort without a filter.
  PostsPage query_posts(const PostsQuery& query) const;

  // Resolves query.filter_id against the registry (Error(kUnknownFilter)).
  std::vector<TermCount> content_lens(const LensQuery& query) const;
  std::vector<FilterKeywords> cluster_lens(const LensQuery& query) const;
  std::vector<TopicSummary> topics_lens(const LensQuery& query, const LdaParams& params) const;

  // Defaults span the stored posts.
  RiverSeries theme_river(std::optional<std::int64_t> bin_width_ms, std::optional<Timestamp> from,
                          std::optional<Timestamp> to) const;
  std::vector<PostPtr> drill_down(const std::string& filter_id, Timestamp bin_start,
                                  std::optional<std::int64_t> bin_width_ms) const;

  // Events whose bin starts at or after `since`, in detection order.
  std::vector<AnomalyEvent> anomalies(std::optional<Timestamp> since) const;

  // Burst-weighted topics of the last `window_ms` before the newest post
  // against the window before it.
  std::vector<TopicSummary> trending(std::int64_t window_ms, std::size_t k) const;

  // Writes a snapshot for every model that has seen labels.
  void save_snapshots();

 private:
  struct FilterSlot {
    std::mutex train_mu;
    mutable std::mutex model_mu;
    std::shared_ptr<const ModelState> model;
    LabelStore labels;
  };

  FilterSlot& slot(const std::string& filter_id);
  FilterSlot* find_slot(const std::string& filter_id) const;
  const KeywordFilter* lookup(const FilterSnapshot& snap, const std::optional<std::string>& id) const;
  void index_post(PostPtr post, bool publish);
  static std::vector<KeywordFilter> filter_list(const FilterSnapshot& snap);

  Config config_;
  TrainOptions train_;
  std::unique_ptr<DataStore> store_;
  std::vector<std::string> load_warnings_;

  FilterRegistry registry_;
  std::mutex filters_write_mu_;

  mutable std::shared_mutex slots_mu_;
  std::map<std::string, std::unique_ptr<FilterSlot>> slots_;

  std::mutex ingest_mu_;
  mutable std::shared_mutex posts_mu_;
  std::vector<PostPtr> posts_;
  std::unordered_map<std::string, PostPtr> by_id_;
  SpatialIndex index_;

  TermBurstMonitor monitor_;
  mutable std::mutex anomalies_mu_;
  std::vector<AnomalyEvent> anomalies_;

  EventHub events_;
};

}  // namespace smart
