#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "smart/ingest.hpp"

namespace smart {

enum class LabelClass : std::uint8_t { kRelevant = 0, kNotRelevant = 1, kCantDecide = 2 };

inline constexpr std::size_t kNumClasses = 3;

std::string_view to_string(LabelClass c);
std::optional<LabelClass> parse_label_class(std::string_view s);

struct LabelRecord {
  std::string post_id;
  std::string filter_id;
  LabelClass label = LabelClass::kRelevant;
  Timestamp ts;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

struct RelevanceScore {
  double p_rel = 1.0 / 3.0;
  double p_not = 1.0 / 3.0;
  double p_cant = 1.0 / 3.0;

  // Argmax with can't-decide folded into not-relevant.
  bool predicts_relevant() const { return p_rel > p_not && p_rel > p_cant; }
};

// Hashed bag-of-words, L2-normalized. Indices strictly increasing.
struct SparseFeatures {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t size() const { return index.size(); }
  friend bool operator==(const SparseFeatures&, const SparseFeatures&) = default;
};

inline constexpr std::uint32_t kInputDim = 1u << 18;
inline constexpr std::uint32_t kHiddenWidth = 64;

// FNV-1a 64-bit over the token's UTF-8 bytes.
std::uint64_t hash_token(std::string_view token);

SparseFeatures featurize(std::span<const std::string> tokens, std::uint32_t dim = kInputDim);

struct NetworkShape {
  std::uint32_t input_dim = kInputDim;
  std::uint32_t hidden = kHiddenWidth;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

struct Example {
  SparseFeatures features;
  LabelClass label = LabelClass::kRelevant;
};

struct TrainOptions {
  int epochs = 5;
  std::size_t batch_size = 8;
  double learning_rate = 0.05;
};

inline constexpr double kInitScale = 0.05;

enum class Init { kUniform, kZero };

// Counter-based generator: the initial value of parameter `slot` depends only
// on (seed, slot), so first-layer rows can be produced on demand.
double init_weight(std::uint64_t seed, std::uint64_t slot);

// Gradient of the mean cross-entropy over a batch. First-layer rows are
// sparse: only rows touched by the batch's features appear.
struct Gradient {
  std::map<std::uint32_t, std::vector<double>> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;
};

// One-hidden-layer ReLU network with a 3-way softmax output.
// W1 is D x H (row per input feature), W2 is H x 3, both row-major.
// Untouched W1 rows are never stored; their values come from init_weight.
template <class Real>
class Network {
 public:
  Network(NetworkShape shape, std::uint64_t seed, Init init = Init::kUniform)
      : shape_(shape), seed_(seed), init_(init) {
    b1_.assign(shape_.hidden, Real{0});
    b2_.assign(kNumClasses, Real{0});
    w2_.resize(static_cast<std::size_t>(shape_.hidden) * kNumClasses);
    const std::uint64_t base = static_cast<std::uint64_t>(shape_.input_dim) * shape_.hidden;
    for (std::size_t k = 0; k < w2_.size(); ++k) {
      w2_[k] = init_ == Init::kZero ? Real{0} : static_cast<Real>(init_weight(seed_, base + k));
    }
  }

  const NetworkShape& shape() const { return shape_; }
  std::uint64_t seed() const { return seed_; }

  Real initial_w1(std::uint32_t row, std::uint32_t j) const {
    if (init_ == Init::kZero) return Real{0};
    return static_cast<Real>(
        init_weight(seed_, static_cast<std::uint64_t>(row) * shape_.hidden + j));
  }

  Real w1(std::uint32_t row, std::uint32_t j) const {
    auto it = rows_.find(row);
    return it == rows_.end() ? initial_w1(row, j) : it->second[j];
  }

  // Returns the stored row, creating it from the initializer if needed.
  std::vector<Real>& mutable_w1_row(std::uint32_t row) {
    auto [it, inserted] = rows_.try_emplace(row);
    if (inserted) {
      it->second.resize(shape_.hidden);
      for (std::uint32_t j = 0; j < shape_.hidden; ++j) it->second[j] = initial_w1(row, j);
    }
    return it->second;
  }

  const std::unordered_map<std::uint32_t, std::vector<Real>>& stored_rows() const {
    return rows_;
  }

  std::vector<Real>& b1() { return b1_; }
  const std::vector<Real>& b1() const { return b1_; }
  std::vector<Real>& w2() { return w2_; }
  const std::vector<Real>& w2() const { return w2_; }
  std::vector<Real>& b2() { return b2_; }
  const std::vector<Real>& b2() const { return b2_; }

  // Drops stored W1 rows that equal their initial value.
  void compact() {
    for (auto it = rows_.begin(); it != rows_.end();) {
      bool same = true;
      for (std::uint32_t j = 0; j < shape_.hidden && same; ++j) {
        same = it->second[j] == initial_w1(it->first, j);
      }
      it = same ? rows_.erase(it) : std::next(it);
    }
  }

  struct Activations {
    std::vector<double> pre;     // hidden pre-activation
    std::vector<double> hidden;  // ReLU output
    double prob[kNumClasses];
  };

  Activations forward(const SparseFeatures& x) const {
    const std::uint32_t h = shape_.hidden;
    Activations a;
    a.pre.assign(b1_.begin(), b1_.end());
    for (std::size_t n = 0; n < x.size(); ++n) {
      const std::uint32_t row = x.index[n];
      const double xv = x.value[n];
      auto it = rows_.find(row);
      if (it != rows_.end()) {
        for (std::uint32_t j = 0; j < h; ++j) a.pre[j] += xv * static_cast<double>(it->second[j]);
      } else {
        for (std::uint32_t j = 0; j < h; ++j) a.pre[j] += xv * static_cast<double>(initial_w1(row, j));
      }
    }
    a.hidden.resize(h);
    double logits[kNumClasses];
    for (std::size_t c = 0; c < kNumClasses; ++c) logits[c] = static_cast<double>(b2_[c]);
    for (std::uint32_t j = 0; j < h; ++j) {
      a.hidden[j] = a.pre[j] > 0.0 ? a.pre[j] : 0.0;
      if (a.hidden[j] == 0.0) continue;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        logits[c] += a.hidden[j] * static_cast<double>(w2_[j * kNumClasses + c]);
      }
    }
    double top = std::max({logits[0], logits[1], logits[2]});
    double total = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      a.prob[c] = std::exp(logits[c] - top);
      total += a.prob[c];
    }
    for (double& p : a.prob) p /= total;
    return a;
  }

  RelevanceScore predict(const SparseFeatures& x) const {
    auto a = forward(x);
    return {a.prob[0], a.prob[1], a.prob[2]};
  }

  // Mean cross-entropy over the batch.
  double loss(std::span<const Example> batch) const {
    double total = 0.0;
    for (const auto& ex : batch) {
      total -= std::log(forward(ex.features).prob[static_cast<std::size_t>(ex.label)]);
    }
    return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
  }

  Gradient gradient(std::span<const Example> batch) const {
    const std::uint32_t h = shape_.hidden;
    Gradient g;
    g.b1.assign(h, 0.0);
    g.w2.assign(w2_.size(), 0.0);
    g.b2.assign(kNumClasses, 0.0);
    if (batch.empty()) return g;
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dpre(h);
    for (const auto& ex : batch) {
      auto a = forward(ex.features);
      double dz[kNumClasses];
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        dz[c] = (a.prob[c] - (static_cast<std::size_t>(ex.label) == c ? 1.0 : 0.0)) * scale;
        g.b2[c] += dz[c];
      }
      for (std::uint32_t j = 0; j < h; ++j) {
        double back = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
          g.w2[j * kNumClasses + c] += a.hidden[j] * dz[c];
          back += static_cast<double>(w2_[j * kNumClasses + c]) * dz[c];
        }
        dpre[j] = a.pre[j] > 0.0 ? back : 0.0;
        g.b1[j] += dpre[j];
      }
      for (std::size_t n = 0; n < ex.features.size(); ++n) {
        auto& row = g.w1[ex.features.index[n]];
        if (row.empty()) row.assign(h, 0.0);
        const double xv = ex.features.value[n];
        for (std::uint32_t j = 0; j < h; ++j) row[j] += xv * dpre[j];
      }
    }
    return g;
  }

  void apply(const Gradient& g, double learning_rate) {
    for (const auto& [row, grad] : g.w1) {
      auto& w = mutable_w1_row(row);
      for (std::uint32_t j = 0; j < shape_.hidden; ++j) {
        w[j] = static_cast<Real>(static_cast<double>(w[j]) - learning_rate * grad[j]);
      }
    }
    auto step = [learning_rate](std::vector<Real>& p, const std::vector<double>& d) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        p[k] = static_cast<Real>(static_cast<double>(p[k]) - learning_rate * d[k]);
      }
    };
    step(b1_, g.b1);
    step(w2_, g.w2);
    step(b2_, g.b2);
  }

  bool all_finite() const {
    auto finite = [](const std::vector<Real>& v) {
      return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
    };
    if (!finite(b1_) || !finite(w2_) || !finite(b2_)) return false;
    return std::all_of(rows_.begin(), rows_.end(), [&](const auto& kv) { return finite(kv.second); });
  }

 private:
  NetworkShape shape_;
  std::uint64_t seed_;
  Init init_;
  std::unordered_map<std::uint32_t, std::vector<Real>> rows_;
  std::vector<Real> b1_;
  std::vector<Real> w2_;
  std::vector<Real> b2_;
};

// Seeded Fisher-Yates; identical across platforms for a given seed.
void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed);

// Trains `net` in place: `options.epochs` passes of seeded-shuffled
// minibatch gradient descent.
template <class Real>
void train(Network<Real>& net, std::span<const Example> examples, std::uint64_t shuffle_seed,
           const TrainOptions& options = {}) {
  if (examples.empty()) return;
  std::vector<std::size_t> order(examples.size());
  std::vector<Example> batch;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, shuffle_seed + static_cast<std::uint64_t>(epoch));
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      std::size_t end = std::min(order.size(), start + options.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      net.apply(net.gradient(batch), options.learning_rate);
    }
  }
}

// Per-filter model snapshot. Immutable once published.
struct ModelState {
  std::string filter_id;
  std::uint64_t seed = 0;
  std::uint64_t n_labels_seen = 0;
  std::uint64_t version = 1;
  Network<float> net;

  ModelState(std::string filter, std::uint64_t model_seed, NetworkShape shape = {})
      : filter_id(std::move(filter)), seed(model_seed), net(shape, model_seed) {}
};

// Per-filter seed derived from the service-wide learner seed.
std::uint64_t model_seed_for(std::string_view filter_id, std::uint64_t base_seed);

// Ordered label history per filter; relabeling a post replaces its earlier
// record in place.
class LabelStore {
 public:
  // Returns true when the (post, filter) pair was new.
  bool put(const LabelRecord& label);

  std::span<const LabelRecord> labels(std::string_view filter_id) const;
  std::size_t size(std::string_view filter_id) const { return labels(filter_id).size(); }
  std::vector<std::string> filter_ids() const;

 private:
  struct PerFilter {
    std::vector<LabelRecord> records;
    std::unordered_map<std::string, std::size_t> by_post;
  };
  std::map<std::string, PerFilter, std::less<>> filters_;
};

using PostResolver = std::function<PostPtr(std::string_view post_id)>;

// One retraining round: `options.epochs` epochs over `examples`, continuing
// from the current weights. The shuffle depends on (seed, version), where
// version is the model version being produced.
void retrain_step(Network<float>& net, std::span<const Example> examples, std::uint64_t seed,
                  std::uint64_t version, const TrainOptions& options = {});

// Stores the label (overwriting any earlier one for the pair) and retrains
// over every label for the filter, starting from `model`'s weights. The
// result is a pure function of the seed and the ordered label history.
// Throws Error(kUnknownPost) or Error(kUnknownFilter) when the label does
// not belong to `model`.
ModelState add_label(const ModelState& model, LabelStore& store, const LabelRecord& label,
                     const PostResolver& resolve, const TrainOptions& options = {});

RelevanceScore score_post(const ModelState& model, const Post& post);

enum class SortOrder { kDescending, kAscending };

struct RankedPost {
  PostPtr post;
  RelevanceScore score;
};

// Sorted by p_rel in `order`; ties go to the newer post, then to the
// lexicographically smaller id.
std::vector<RankedPost> rank(const ModelState& model, std::span<const PostPtr> posts,
                             SortOrder order = SortOrder::kDescending);

struct GoldPost {
  PostPtr post;
  bool relevant = false;
};

struct CurvePoint {
  std::size_t budget = 0;
  double accuracy = 0.0;
  // Fraction of held-out relevant posts ranked in the top half.
  double top_half_recall = 0.0;
};

struct EvalOptions {
  NetworkShape shape;
  TrainOptions train;
  double pool_fraction = 0.7;
};

// Seeded stratified 70/30 split. A fresh model is fed seeded-random pool
// posts one label at a time, exactly as add_label would; after `budget`
// labels the held-out part is scored. Budgets share one labeling sequence,
// so smaller budgets are prefixes of larger ones.
// Throws Error(kBudgetExceedsPool).
std::vector<CurvePoint> eval_curve(std::span<const GoldPost> corpus,
                                   std::span<const std::size_t> budgets, std::uint64_t seed,
                                   const EvalOptions& options = {});

}  // namespace smart
