#include "smart/learner.hpp"

#include <cmath>

#include "smart/error.hpp"
#include "smart/random.hpp"

namespace smart {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5EEDF00DCAFEBABEull;

std::vector<Example> build_examples(std::span<const LabelRecord> labels,
                                    const PostResolver& resolve, std::uint32_t dim) {
  std::vector<Example> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    PostPtr post = resolve(l.post_id);
    if (!post) throw Error(ErrorCode::kUnknownPost, l.post_id);
    out.push_back({featurize(post->tokens, dim), l.label});
  }
  return out;
}

bool ranks_before(const RankedPost& a, const RankedPost& b, SortOrder order) {
  if (a.score.p_rel != b.score.p_rel) {
    return order == SortOrder::kDescending ? a.score.p_rel > b.score.p_rel
                                           : a.score.p_rel < b.score.p_rel;
  }
  if (a.post->ts != b.post->ts) return a.post->ts > b.post->ts;
  return a.post->id < b.post->id;
}

}  // namespace

std::string_view to_string(LabelClass c) {
  switch (c) {
    case LabelClass::kRelevant: return "relevant";
    case LabelClass::kNotRelevant: return "not_relevant";
    case LabelClass::kCantDecide: return "cant_decide";
  }
  return "unknown";
}

std::optional<LabelClass> parse_label_class(std::string_view s) {
  if (s == "relevant") return LabelClass::kRelevant;
  if (s == "not_relevant") return LabelClass::kNotRelevant;
  if (s == "cant_decide") return LabelClass::kCantDecide;
  return std::nullopt;
}

std::uint64_t hash_token(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

SparseFeatures featurize(std::span<const std::string> tokens, std::uint32_t dim) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : tokens) counts[static_cast<std::uint32_t>(hash_token(t) % dim)] += 1.0;
  SparseFeatures f;
  double norm = 0.0;
  for (const auto& [idx, c] : counts) norm += c * c;
  norm = std::sqrt(norm);
  f.index.reserve(counts.size());
  f.value.reserve(counts.size());
  for (const auto& [idx, c] : counts) {
    f.index.push_back(idx);
    f.value.push_back(c / norm);
  }
  return f;
}

double init_weight(std::uint64_t seed, std::uint64_t slot) {
  std::uint64_t bits = splitmix64(splitmix64(seed) ^ slot);
  double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
  return (2.0 * unit - 1.0) * kInitScale;
}

void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed) {
  std::uint64_t state = seed;
  for (std::size_t i = items.size(); i > 1; --i) {
    state = splitmix64(state);
    std::size_t j = static_cast<std::size_t>(state % i);
    std::swap(items[i - 1], items[j]);
  }
}

std::uint64_t model_seed_for(std::string_view filter_id, std::uint64_t base_seed) {
  return splitmix64(base_seed ^ hash_token(filter_id));
}

bool LabelStore::put(const LabelRecord& label) {
  auto& per = filters_[label.filter_id];
  auto [it, inserted] = per.by_post.try_emplace(label.post_id, per.records.size());
  if (inserted) {
    per.records.push_back(label);
  } else {
    per.records[it->second] = label;
  }
  return inserted;
}

std::span<const LabelRecord> LabelStore::labels(std::string_view filter_id) const {
  auto it = filters_.find(filter_id);
  if (it == filters_.end()) return {};
  return it->second.records;
}

std::vector<std::string> LabelStore::filter_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, per] : filters_) out.push_back(id);
  return out;
}

void retrain_step(Network<float>& net, std::span<const Example> examples, std::uint64_t seed,
                  std::uint64_t version, const TrainOptions& options) {
  train(net, examples, splitmix64(seed ^ kShuffleStream) ^ splitmix64(version), options);
}

ModelState add_label(const ModelState& model, LabelStore& store, const LabelRecord& label,
                     const PostResolver& resolve, const TrainOptions& options) {
  if (label.filter_id != model.filter_id) throw Error(ErrorCode::kUnknownFilter, label.filter_id);
  if (!resolve(label.post_id)) throw Error(ErrorCode::kUnknownPost, label.post_id);
  store.put(label);
  auto labels = store.labels(model.filter_id);
  auto examples = build_examples(labels, resolve, model.net.shape().input_dim);
  ModelState next = model;
  next.version = model.version + 1;
  next.n_labels_seen = labels.size();
  retrain_step(next.net, examples, next.seed, next.version, options);
  return next;
}

RelevanceScore score_post(const ModelState& model, const Post& post) {
  return model.net.predict(featurize(post.tokens, model.net.shape().input_dim));
}

std::vector<RankedPost> rank(const ModelState& model, std::span<const PostPtr> posts,
                             SortOrder order) {
  std::vector<RankedPost> out;
  out.reserve(posts.size());
  for (const auto& p : posts) out.push_back({p, score_post(model, *p)});
  std::sort(out.begin(), out.end(),
            [order](const RankedPost& a, const RankedPost& b) { return ranks_before(a, b, order); });
  return out;
}

std::vector<CurvePoint> eval_curve(std::span<const GoldPost> corpus,
                                   std::span<const std::size_t> budgets, std::uint64_t seed,
                                   const EvalOptions& options) {
  std::vector<std::size_t> rel, irr;
  for (std::size_t i = 0; i < corpus.size(); ++i) (corpus[i].relevant ? rel : irr).push_back(i);
  seeded_shuffle(rel, splitmix64(seed ^ 0x11));
  seeded_shuffle(irr, splitmix64(seed ^ 0x22));

  std::vector<std::size_t> pool, held_out;
  auto split = [&](const std::vector<std::size_t>& group) {
    auto n_pool = static_cast<std::size_t>(
        std::llround(options.pool_fraction * static_cast<double>(group.size())));
    pool.insert(pool.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_pool));
    held_out.insert(held_out.end(), group.begin() + static_cast<std::ptrdiff_t>(n_pool), group.end());
  };
  split(rel);
  split(irr);
  // Labeling order over the pool; budgets take nested prefixes.
  seeded_shuffle(pool, splitmix64(seed ^ 0x33));
  // Held-out order decides score ties, so it must not be grouped by class.
  seeded_shuffle(held_out, splitmix64(seed ^ 0x44));

  std::vector<SparseFeatures> held_features;
  held_features.reserve(held_out.size());
  for (std::size_t i : held_out) {
    held_features.push_back(featurize(corpus[i].post->tokens, options.shape.input_dim));
  }

  std::size_t max_budget = 0;
  for (std::size_t budget : budgets) {
    if (budget > pool.size()) {
      throw Error(ErrorCode::kBudgetExceedsPool,
                  std::to_string(budget) + " > " + std::to_string(pool.size()));
    }
    max_budget = std::max(max_budget, budget);
  }

  auto evaluate = [&](const Network<float>& net, std::size_t budget) {
    std::size_t correct = 0;
    std::vector<std::pair<double, bool>> ranked;  // (p_rel, relevant)
    ranked.reserve(held_out.size());
    for (std::size_t n = 0; n < held_out.size(); ++n) {
      RelevanceScore s = net.predict(held_features[n]);
      bool gold = corpus[held_out[n]].relevant;
      if (s.predicts_relevant() == gold) ++correct;
      ranked.emplace_back(s.p_rel, gold);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t half = ranked.size() / 2, rel_total = 0, rel_top = 0;
    for (std::size_t n = 0; n < ranked.size(); ++n) {
      if (!ranked[n].second) continue;
      ++rel_total;
      if (n < half) ++rel_top;
    }
    CurvePoint point;
    point.budget = budget;
    point.accuracy = held_out.empty() ? 0.0 : static_cast<double>(correct) / held_out.size();
    point.top_half_recall = rel_total == 0 ? 0.0 : static_cast<double>(rel_top) / rel_total;
    return point;
  };

  std::map<std::size_t, CurvePoint> at_budget;
  Network<float> net(options.shape, seed);
  std::uint64_t version = 1;
  std::vector<Example> examples;
  examples.reserve(max_budget);
  for (std::size_t k = 0;; ++k) {
    if (std::find(budgets.begin(), budgets.end(), k) != budgets.end()) {
      at_budget.emplace(k, evaluate(net, k));
    }
    if (k == max_budget) break;
    const auto& g = corpus[pool[k]];
    examples.push_back({featurize(g.post->tokens, options.shape.input_dim),
                        g.relevant ? LabelClass::kRelevant : LabelClass::kNotRelevant});
    ++version;
    retrain_step(net, examples, seed, version, options.train);
  }

  std::vector<CurvePoint> out;
  out.reserve(budgets.size());
  for (std::size_t budget : budgets) out.push_back(at_budget.at(budget));
  return out;
}

}  // namespace smart
