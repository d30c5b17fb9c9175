#include <doctest.h>

#include <cmath>
#include <unordered_map>

#include "smart/corpus.hpp"
#include "smart/error.hpp"
#include "smart/learner.hpp"
#include "support.hpp"

using namespace smart;

namespace {

PostPtr post(const std::string& id, std::int64_t ts, const std::string& text) {
  return std::make_shared<const Post>(make_post(id, Timestamp{ts}, "u", text));
}

struct PostTable {
  std::unordered_map<std::string, PostPtr> by_id;
  void add(const PostPtr& p) { by_id[p->id] = p; }
  PostResolver resolver() const {
    return [this](std::string_view id) -> PostPtr {
      auto it = by_id.find(std::string(id));
      return it == by_id.end() ? nullptr : it->second;
    };
  }
};

bool same_weights(const Network<float>& a, const Network<float>& b) {
  if (a.b1() != b.b1() || a.w2() != b.w2() || a.b2() != b.b2()) return false;
  auto ra = a.stored_rows(), rb = b.stored_rows();
  if (ra.size() != rb.size()) return false;
  for (const auto& [row, w] : ra) {
    auto it = rb.find(row);
    if (it == rb.end() || it->second != w) return false;
  }
  return true;
}

// Logit needed on class 0 (others at 0) to reach probability p.
double logit_for(double p) { return std::log(2.0 * p / (1.0 - p)); }

}  // namespace

TEST_CASE("fnv-1a reference values") {
  CHECK(hash_token("") == 0xcbf29ce484222325ull);
  CHECK(hash_token("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hash_token("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("featurize counts, normalizes and ignores order") {
  std::vector<std::string> t = {"snow", "snow", "rain"};
  auto f = featurize(t);
  REQUIRE(f.size() == 2);
  std::uint32_t snow = static_cast<std::uint32_t>(hash_token("snow") % kInputDim);
  std::uint32_t rain = static_cast<std::uint32_t>(hash_token("rain") % kInputDim);
  double norm = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    norm += f.value[i] * f.value[i];
    if (f.index[i] == snow) CHECK(f.value[i] == doctest::Approx(2.0 / std::sqrt(5.0)));
    if (f.index[i] == rain) CHECK(f.value[i] == doctest::Approx(1.0 / std::sqrt(5.0)));
  }
  CHECK(norm == doctest::Approx(1.0));
  CHECK(featurize(std::vector<std::string>{}).size() == 0);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0, n = rng.below(15); i < n; ++i) tokens.push_back(testing::vocab()[rng.below(30)]);
    auto shuffled = tokens;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    auto a = featurize(tokens), b = featurize(shuffled);
    CHECK(a.index == b.index);
    CHECK(a.value == b.value);
  }
}

TEST_CASE("zero network predicts uniform") {
  Network<float> net(NetworkShape{}, 1, Init::kZero);
  std::vector<std::string> t = {"anything"};
  auto s = net.predict(featurize(t));
  CHECK(s.p_rel == doctest::Approx(1.0 / 3));
  CHECK(s.p_not == doctest::Approx(1.0 / 3));
  CHECK(s.p_cant == doctest::Approx(1.0 / 3));
}

TEST_CASE("initial weights are in range and lazily reproducible") {
  Network<float> a(NetworkShape{}, 9), b(NetworkShape{}, 9);
  for (std::uint32_t r : {0u, 17u, kInputDim - 1}) {
    for (std::uint32_t j = 0; j < kHiddenWidth; ++j) {
      CHECK(std::abs(a.w1(r, j)) <= kInitScale);
      CHECK(a.w1(r, j) == b.w1(r, j));
    }
  }
  CHECK(a.stored_rows().empty());
  for (float x : a.b1()) CHECK(x == 0.0f);
  for (float x : a.w2()) CHECK(std::abs(x) <= kInitScale);
  Network<float> c(NetworkShape{}, 10);
  CHECK(a.w1(3, 3) != c.w1(3, 3));
}

TEST_CASE("scores are normalized for random models and inputs") {
  Rng rng(1234);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Network<float> net(NetworkShape{}, rng.next());
    // Push weights far from init on some rows to get sharp outputs.
    auto text = testing::random_text(rng, {});
    auto tokens = tokenize(text);
    auto x = featurize(tokens);
    double scale = rng.uniform(0.0, 50.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
      for (auto& w : net.mutable_w1_row(x.index[n])) w = static_cast<float>(w * scale);
    }
    for (auto& w : net.w2()) w = static_cast<float>(w * scale);
    auto s = net.predict(x);
    bool ok = s.p_rel >= 0 && s.p_rel <= 1 && s.p_not >= 0 && s.p_not <= 1 && s.p_cant >= 0 &&
              s.p_cant <= 1 && std::abs(s.p_rel + s.p_not + s.p_cant - 1.0) <= 1e-6;
    if (!ok) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("analytic gradient matches central differences on a toy instance") {
  const NetworkShape shape{10, 4};
  Network<double> net(shape, 77);
  Rng rng(8);
  std::vector<Example> batch;
  for (LabelClass c : {LabelClass::kRelevant, LabelClass::kNotRelevant, LabelClass::kCantDecide}) {
    SparseFeatures x;
    double norm = 0;
    for (std::uint32_t i = 0; i < 10; ++i) {
      if (rng.chance(0.5)) continue;
      x.index.push_back(i);
      x.value.push_back(rng.uniform(0.1, 1.0));
      norm += x.value.back() * x.value.back();
    }
    for (auto& v : x.value) v /= std::sqrt(norm);
    batch.push_back({x, c});
  }
  // Keep every hidden unit away from the ReLU kink.
  for (auto& b : net.b1()) b = 0.2;
  for (const auto& ex : batch) {
    for (double pre : net.forward(ex.features).pre) REQUIRE(std::abs(pre) > 1e-2);
  }

  Gradient g = net.gradient(batch);
  const double h = 1e-3;
  std::vector<double> analytic, numeric;
  auto probe = [&](double& param, double a) {
    double saved = param;
    param = saved + h;
    double up = net.loss(batch);
    param = saved - h;
    double down = net.loss(batch);
    param = saved;
    analytic.push_back(a);
    numeric.push_back((up - down) / (2 * h));
  };
  for (std::uint32_t r = 0; r < shape.input_dim; ++r) {
    auto it = g.w1.find(r);
    for (std::uint32_t j = 0; j < shape.hidden; ++j) {
      probe(net.mutable_w1_row(r)[j], it == g.w1.end() ? 0.0 : it->second[j]);
    }
  }
  for (std::size_t k = 0; k < net.b1().size(); ++k) probe(net.b1()[k], g.b1[k]);
  for (std::size_t k = 0; k < net.w2().size(); ++k) probe(net.w2()[k], g.w2[k]);
  for (std::size_t k = 0; k < net.b2().size(); ++k) probe(net.b2()[k], g.b2[k]);

  double diff = 0, na = 0, nn = 0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    na += analytic[k] * analytic[k];
    nn += numeric[k] * numeric[k];
  }
  double rel = std::sqrt(diff) / (std::sqrt(na) + std::sqrt(nn));
  CAPTURE(rel);
  CHECK(rel < 1e-4);
  CHECK(analytic.size() == 10 * 4 + 4 + 4 * 3 + 3);
}

TEST_CASE("training on a separable toy set drives the loss down") {
  Network<float> net(NetworkShape{}, 3);
  std::vector<Example> ex;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::string> pos = {"snow", "storm", "w" + std::to_string(i)};
    std::vector<std::string> neg = {"job", "hiring", "v" + std::to_string(i)};
    ex.push_back({featurize(pos), LabelClass::kRelevant});
    ex.push_back({featurize(neg), LabelClass::kNotRelevant});
  }
  double before = net.loss(ex);
  train(net, std::span<const Example>(ex), 1, TrainOptions{30, 8, 0.05});
  CHECK(net.loss(ex) < before * 0.5);
  CHECK(net.all_finite());
  std::vector<std::string> probe = {"snow", "storm"};
  CHECK(net.predict(featurize(probe)).predicts_relevant());
}

TEST_CASE("add_label versions, overwrite rule and errors") {
  PostTable table;
  for (int i = 0; i < 5; ++i) table.add(post("p" + std::to_string(i), i, "snow day " + std::to_string(i)));
  LabelStore store;
  ModelState m0("weather", model_seed_for("weather", 1));
  CHECK(m0.version == 1);

  auto m1 = add_label(m0, store, {"p0", "weather", LabelClass::kRelevant, {}}, table.resolver());
  CHECK(m1.version == 2);
  CHECK(m1.n_labels_seen == 1);
  CHECK(m0.version == 1);  // input untouched

  auto m2 = add_label(m1, store, {"p0", "weather", LabelClass::kNotRelevant, {}}, table.resolver());
  CHECK(m2.version == 3);
  CHECK(m2.n_labels_seen == 1);
  REQUIRE(store.labels("weather").size() == 1);
  CHECK(store.labels("weather")[0].label == LabelClass::kNotRelevant);
  CHECK_FALSE(same_weights(m1.net, m2.net));

  CHECK_THROWS_WITH_AS(add_label(m2, store, {"zz", "weather", LabelClass::kRelevant, {}}, table.resolver()),
                       "UnknownPost(zz)", Error);
  CHECK_THROWS_WITH_AS(add_label(m2, store, {"p1", "other", LabelClass::kRelevant, {}}, table.resolver()),
                       "UnknownFilter(other)", Error);
  CHECK(store.labels("weather").size() == 1);
}

TEST_CASE("add_label is a pure function of seed and label history") {
  auto corpus = generate_corpus(CorpusOptions{300, 0.5, 4});
  PostTable table;
  for (const auto& g : corpus) table.add(g.post);
  auto run = [&] {
    LabelStore store;
    ModelState m("f", model_seed_for("f", 42));
    for (std::size_t i = 0; i < 40; ++i) {
      const auto& g = corpus[i * 7 % corpus.size()];
      m = add_label(m, store, {g.post->id, "f", g.relevant ? LabelClass::kRelevant : LabelClass::kNotRelevant, {}},
                    table.resolver());
      CHECK(m.net.all_finite());
    }
    return m;
  };
  auto a = run(), b = run();
  CHECK(a.version == 41);
  CHECK(same_weights(a.net, b.net));
  for (const auto& g : corpus) {
    auto sa = score_post(a, *g.post), sb = score_post(b, *g.post);
    CHECK(sa.p_rel == sb.p_rel);
  }
  CHECK(model_seed_for("f", 42) != model_seed_for("g", 42));
}

TEST_CASE("rank orders by p_rel with documented tie-breaks") {
  // Hand-built model whose p_rel per post is chosen exactly.
  ModelState m("f", 1, NetworkShape{kInputDim, 1});
  m.net.b1()[0] = 0;
  m.net.w2() = {1.0f, 0.0f, 0.0f};
  m.net.b2() = {0.0f, 0.0f, 0.0f};
  auto set_score = [&](const std::string& token, double p) {
    std::vector<std::string> t = {token};
    auto x = featurize(t);
    m.net.mutable_w1_row(x.index[0])[0] = static_cast<float>(logit_for(p));
  };
  set_score("alpha", 0.689);
  set_score("bravo", 0.916);
  set_score("charlie", 0.611);
  set_score("delta", 0.5);
  std::vector<PostPtr> posts = {post("a", 10, "alpha"), post("b", 10, "bravo"), post("c", 10, "charlie")};
  auto r = rank(m, posts);
  REQUIRE(r.size() == 3);
  CHECK(r[0].post->id == "b");
  CHECK(r[1].post->id == "a");
  CHECK(r[2].post->id == "c");
  CHECK(r[0].score.p_rel == doctest::Approx(0.916).epsilon(1e-5));
  CHECK(r[1].score.p_rel == doctest::Approx(0.689).epsilon(1e-5));

  auto asc = rank(m, posts, SortOrder::kAscending);
  for (std::size_t i = 0; i < 3; ++i) CHECK(asc[i].post->id == r[2 - i].post->id);

  // Equal scores: newer first, then smaller id.
  std::vector<PostPtr> tied = {post("x2", 5, "delta"), post("x1", 5, "delta"), post("old", 1, "delta"),
                               post("new", 9, "delta")};
  auto t = rank(m, tied);
  std::vector<std::string> ids;
  for (const auto& rp : t) ids.push_back(rp.post->id);
  CHECK(ids == std::vector<std::string>{"new", "x1", "x2", "old"});
}

TEST_CASE("eval_curve budgets are nested prefixes and validated") {
  auto corpus = generate_corpus(CorpusOptions{400, 0.5, 2});
  std::vector<std::size_t> both = {0, 10, 20}, one = {20};
  auto a = eval_curve(corpus, both, 3);
  auto b = eval_curve(corpus, one, 3);
  REQUIRE(a.size() == 3);
  CHECK(a[2].accuracy == b[0].accuracy);
  CHECK(a[2].top_half_recall == b[0].top_half_recall);
  CHECK(a[0].accuracy == doctest::Approx(0.5).epsilon(0.2));
  std::vector<std::size_t> too_big = {281};
  CHECK_THROWS_WITH_AS(eval_curve(corpus, too_big, 3), "BudgetExceedsPool(281 > 280)", Error);
}
