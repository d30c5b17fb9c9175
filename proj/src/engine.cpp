#include "smart/engine.hpp"

#include <algorithm>

#include "smart/codec.hpp"
#include "smart/error.hpp"

namespace smart {

Engine::Engine(Config config, const TrainOptions& train)
    : config_(std::move(config)),
      train_(train),
      index_(config_.grid_res_deg),
      monitor_(config_.bin_width_s * 1000, config_.grid_res_deg, config_.anomaly,
               config_.anomaly_alpha) {
  validate(config_);
  if (config_.data_dir.empty()) return;
  store_ = std::make_unique<DataStore>(config_.data_dir);
  LoadedState state = store_->load(config_.learner_seed, train_);
  load_warnings_ = std::move(state.warnings);
  registry_.restore(std::move(state.filters));
  for (auto& post : state.posts) index_post(std::move(post), false);
  for (auto& [id, model] : state.models) slot(id).model = model;
  for (const auto& label : state.label_log) slot(label.filter_id).labels.put(label);
}

Engine::~Engine() { events_.close_all(); }

Engine::FilterSlot& Engine::slot(const std::string& filter_id) {
  {
    std::shared_lock lock(slots_mu_);
    if (auto it = slots_.find(filter_id); it != slots_.end()) return *it->second;
  }
  std::unique_lock lock(slots_mu_);
  auto& s = slots_[filter_id];
  if (!s) {
    s = std::make_unique<FilterSlot>();
    s->model = std::make_shared<const ModelState>(
        filter_id, model_seed_for(filter_id, config_.learner_seed));
  }
  return *s;
}

Engine::FilterSlot* Engine::find_slot(const std::string& filter_id) const {
  std::shared_lock lock(slots_mu_);
  auto it = slots_.find(filter_id);
  return it == slots_.end() ? nullptr : it->second.get();
}

const KeywordFilter* Engine::lookup(const FilterSnapshot& snap,
                                    const std::optional<std::string>& id) const {
  if (!id) return nullptr;
  auto it = snap->find(*id);
  if (it == snap->end()) throw Error(ErrorCode::kUnknownFilter, *id);
  return &it->second.filter;
}

std::vector<KeywordFilter> Engine::filter_list(const FilterSnapshot& snap) {
  std::vector<KeywordFilter> out;
  out.reserve(snap->size());
  for (const auto& [id, f] : *snap) out.push_back(f.filter);
  return out;
}

StoredFilter Engine::upsert_filter(const FilterDef& def) {
  std::lock_guard lock(filters_write_mu_);
  StoredFilter stored = registry_.upsert(def);
  if (store_) store_->save_filters(registry_.list());
  slot(stored.filter.id);
  return stored;
}

void Engine::index_post(PostPtr post, bool publish) {
  {
    std::unique_lock lock(posts_mu_);
    posts_.push_back(post);
    by_id_.emplace(post->id, post);
  }
  index_.insert(post);
  auto fired = monitor_.observe(*post);
  if (!fired.empty()) {
    std::lock_guard lock(anomalies_mu_);
    anomalies_.insert(anomalies_.end(), fired.begin(), fired.end());
  }
  if (!publish) return;
  auto payload = codec::post_json(*post);
  payload["filters"] = nlohmann::json::array();
  for (const auto& [id, f] : *registry_.snapshot()) {
    if (matches(f.filter, post->tokens)) payload["filters"].push_back(id);
  }
  events_.publish("post", std::move(payload));
  for (const auto& e : fired) events_.publish("anomaly", codec::anomaly_json(e));
}

void Engine::add_post(Post post) {
  std::lock_guard lock(ingest_mu_);
  {
    std::shared_lock read(posts_mu_);
    if (by_id_.contains(post.id)) throw Error(ErrorCode::kDuplicateId, post.id);
  }
  if (store_) store_->append_post(post);
  index_post(std::make_shared<const Post>(std::move(post)), true);
}

IngestReport Engine::ingest(std::istream& ndjson) {
  return ingest_stream(ndjson, [&](Post p) { add_post(std::move(p)); });
}

LabelOutcome Engine::add_label(LabelRecord label) {
  auto snap = registry_.snapshot();
  if (!snap->contains(label.filter_id)) throw Error(ErrorCode::kUnknownFilter, label.filter_id);
  if (!find_post(label.post_id)) throw Error(ErrorCode::kUnknownPost, label.post_id);

  FilterSlot& s = slot(label.filter_id);
  std::lock_guard train(s.train_mu);
  std::shared_ptr<const ModelState> current;
  {
    std::lock_guard lock(s.model_mu);
    current = s.model;
  }
  if (store_) store_->append_label(label);
  PostResolver resolve = [this](std::string_view id) { return find_post(std::string(id)); };
  auto next = std::make_shared<const ModelState>(
      smart::add_label(*current, s.labels, label, resolve, train_));
  LabelOutcome out{next->filter_id, next->version, next->n_labels_seen};
  {
    std::lock_guard lock(s.model_mu);
    s.model = next;
  }
  events_.publish("scores_updated", {{"filter_id", out.filter_id},
                                     {"version", out.version},
                                     {"n_labels", out.n_labels}});
  return out;
}

std::shared_ptr<const ModelState> Engine::model(const std::string& filter_id) const {
  FilterSlot* s = find_slot(filter_id);
  if (!s) throw Error(ErrorCode::kUnknownModel, filter_id);
  std::lock_guard lock(s->model_mu);
  return s->model;
}

std::vector<LabelRecord> Engine::labels(const std::string& filter_id) const {
  FilterSlot* s = find_slot(filter_id);
  if (!s) return {};
  std::lock_guard lock(s->train_mu);
  auto span = s->labels.labels(filter_id);
  return {span.begin(), span.end()};
}

PostPtr Engine::find_post(const std::string& id) const {
  std::shared_lock lock(posts_mu_);
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

std::vector<PostPtr> Engine::posts() const {
  std::shared_lock lock(posts_mu_);
  return posts_;
}

std::size_t Engine::post_count() const {
  std::shared_lock lock(posts_mu_);
  return posts_.size();
}

PostsPage Engine::query_posts(const PostsQuery& query) const {
  auto snap = registry_.snapshot();
  const KeywordFilter* filter = lookup(snap, query.filter_id);
  if (query.sort == PostSort::kRelevance && !filter) {
    throw Error(ErrorCode::kInvalidArgument, "sort");
  }
  std::vector<PostPtr> candidates;
  if (query.region) {
    LensQuery lq;
    lq.region = *query.region;
    lq.from = query.from;
    lq.to = query.to;
    validate(lq);
    candidates = index_.collect(lq, filter);
  } else {
    for (auto& p : posts()) {
      if (p->ts < query.from || !(p->ts < query.to)) continue;
      if (filter && !matches(*filter, p->tokens)) continue;
      candidates.push_back(std::move(p));
    }
  }

  PostsPage page;
  page.total = candidates.size();
  std::vector<RankedPost> ranked;
  if (filter) {
    auto m = model(filter->id);
    page.model_version = m->version;
    if (query.sort == PostSort::kRelevance) {
      ranked = rank(*m, candidates, query.order);
    } else {
      for (auto& p : candidates) ranked.push_back({p, score_post(*m, *p)});
    }
  } else {
    for (auto& p : candidates) ranked.push_back({std::move(p), {}});
  }
  if (query.sort == PostSort::kTime) {
    const bool asc = query.order == SortOrder::kAscending;
    std::sort(ranked.begin(), ranked.end(), [asc](const RankedPost& a, const RankedPost& b) {
      if (a.post->ts != b.post->ts) return asc ? a.post->ts < b.post->ts : b.post->ts < a.post->ts;
      return a.post->id < b.post->id;
    });
  }
  const std::size_t limit = std::min(query.limit, kMaxPageSize);
  const std::size_t begin = std::min(query.offset, ranked.size());
  const std::size_t end = std::min(ranked.size(), begin + limit);
  page.posts.assign(std::make_move_iterator(ranked.begin() + static_cast<std::ptrdiff_t>(begin)),
                    std::make_move_iterator(ranked.begin() + static_cast<std::ptrdiff_t>(end)));
  return page;
}

std::vector<TermCount> Engine::content_lens(const LensQuery& query) const {
  validate(query);
  auto snap = registry_.snapshot();
  return smart::content_lens(index_, query, &Stopwords::builtin(), lookup(snap, query.filter_id));
}

std::vector<FilterKeywords> Engine::cluster_lens(const LensQuery& query) const {
  validate(query);
  auto snap = registry_.snapshot();
  std::vector<KeywordFilter> filters;
  if (const KeywordFilter* f = lookup(snap, query.filter_id)) {
    filters.push_back(*f);
  } else {
    filters = filter_list(snap);
  }
  return smart::cluster_lens(index_, query, filters);
}

std::vector<TopicSummary> Engine::topics_lens(const LensQuery& query, const LdaParams& params) const {
  validate(query);
  auto snap = registry_.snapshot();
  auto in = posts_in(index_, query, lookup(snap, query.filter_id));
  return lda_fit(in, params, &Stopwords::builtin()).topics;
}

RiverSeries Engine::theme_river(std::optional<std::int64_t> bin_width_ms,
                                std::optional<Timestamp> from, std::optional<Timestamp> to) const {
  auto all = posts();
  auto filters = filter_list(registry_.snapshot());
  const std::int64_t width = bin_width_ms.value_or(config_.bin_width_s * 1000);
  if (!from || !to) {
    if (all.empty()) {
      if (width <= 0) throw Error(ErrorCode::kInvalidArgument, "bin");
      RiverSeries empty;
      empty.bin_width_ms = width;
      for (const auto& f : filters) empty.series[f.id];
      return empty;
    }
    auto [lo, hi] = std::minmax_element(all.begin(), all.end(),
                                        [](const PostPtr& a, const PostPtr& b) { return a->ts < b->ts; });
    if (!from) from = (*lo)->ts;
    if (!to) to = Timestamp{(*hi)->ts.ms + 1};
  }
  return smart::theme_river(all, filters, width, *from, *to);
}

std::vector<PostPtr> Engine::drill_down(const std::string& filter_id, Timestamp bin_start,
                                        std::optional<std::int64_t> bin_width_ms) const {
  auto filters = filter_list(registry_.snapshot());
  return smart::drill_down(posts(), filters, filter_id, bin_start,
                           bin_width_ms.value_or(config_.bin_width_s * 1000));
}

std::vector<AnomalyEvent> Engine::anomalies(std::optional<Timestamp> since) const {
  std::lock_guard lock(anomalies_mu_);
  if (!since) return anomalies_;
  std::vector<AnomalyEvent> out;
  for (const auto& e : anomalies_) {
    if (!(e.bin_start < *since)) out.push_back(e);
  }
  return out;
}

std::vector<TopicSummary> Engine::trending(std::int64_t window_ms, std::size_t k) const {
  if (window_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "window");
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k");
  auto all = posts();
  if (all.empty()) return {};
  Timestamp newest = all.front()->ts;
  for (const auto& p : all) newest = std::max(newest, p->ts);
  const std::int64_t end = newest.ms + 1;
  std::vector<PostPtr> current, baseline;
  for (auto& p : all) {
    if (p->ts.ms >= end - window_ms) {
      current.push_back(std::move(p));
    } else if (p->ts.ms >= end - 2 * window_ms) {
      baseline.push_back(std::move(p));
    }
  }
  return trending_topics(current, baseline, k, LdaParams{}, &Stopwords::builtin());
}

void Engine::save_snapshots() {
  if (!store_) return;
  std::vector<std::shared_ptr<const ModelState>> models;
  {
    std::shared_lock lock(slots_mu_);
    for (const auto& [id, s] : slots_) {
      std::lock_guard m(s->model_mu);
      if (s->model->version > 1) models.push_back(s->model);
    }
  }
  for (const auto& m : models) store_->save_model(*m);
}

}  // namespace smart
