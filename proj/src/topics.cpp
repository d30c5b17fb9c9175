#include "smart/topics.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "smart/error.hpp"
#include "smart/random.hpp"

namespace smart {

// Generated from data/stopwords.txt.
extern const char* const kBuiltinStopwords[];
extern const std::size_t kBuiltinStopwordsCount;

namespace {

using Counts = std::map<std::string, std::size_t, std::less<>>;

Counts count_terms(std::span<const PostPtr> posts, const Stopwords* drop) {
  Counts counts;
  for (const auto& p : posts) {
    for (const auto& t : p->tokens) {
      if (drop && drop->contains(t)) continue;
      ++counts[t];
    }
  }
  return counts;
}

bool by_weight(const WeightedTerm& a, const WeightedTerm& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return a.term < b.term;
}

}  // namespace

const Stopwords& Stopwords::builtin() {
  static const Stopwords words = [] {
    std::set<std::string, std::less<>> s;
    for (std::size_t i = 0; i < kBuiltinStopwordsCount; ++i) s.emplace(kBuiltinStopwords[i]);
    return Stopwords(std::move(s));
  }();
  return words;
}

Stopwords Stopwords::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path);
  std::set<std::string, std::less<>> s;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    s.emplace(line.substr(b, e - b + 1));
  }
  return Stopwords(std::move(s));
}

std::vector<TermCount> top_terms(std::span<const PostPtr> posts, std::size_t k,
                                 const Stopwords* drop) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  Counts counts = count_terms(posts, drop);
  std::vector<TermCount> all;
  all.reserve(counts.size());
  for (auto& [term, c] : counts) all.push_back({term, c});
  auto cmp = [](const TermCount& a, const TermCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.term < b.term;
  };
  std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), cmp);
  all.resize(n);
  return all;
}

std::vector<double> cloud_weights(std::span<const TermCount> terms) {
  std::size_t top = 0;
  for (const auto& t : terms) top = std::max(top, t.count);
  std::vector<double> out;
  out.reserve(terms.size());
  for (const auto& t : terms) {
    out.push_back(top == 0 ? 0.0 : static_cast<double>(t.count) / static_cast<double>(top));
  }
  return out;
}

LdaResult lda_fit(std::span<const PostPtr> posts, const LdaParams& params,
                  const Stopwords* drop) {
  if (params.topics < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (!(params.alpha > 0.0) || !(params.beta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha and beta must be > 0");
  }
  if (params.iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");

  std::map<std::string, std::uint32_t, std::less<>> vocab;
  std::vector<std::vector<std::string_view>> kept;
  std::set<std::vector<std::string_view>> distinct;
  for (const auto& p : posts) {
    std::vector<std::string_view> doc;
    for (const auto& t : p->tokens) {
      if (drop && drop->contains(t)) continue;
      doc.push_back(t);
      vocab.emplace(t, 0);
    }
    if (doc.empty()) continue;
    distinct.insert(doc);
    kept.push_back(std::move(doc));
  }
  if (distinct.size() < params.topics) {
    throw Error(ErrorCode::kCorpusTooSmall, std::to_string(distinct.size()) + " distinct documents < K=" +
                                                std::to_string(params.topics));
  }
  std::vector<std::string> terms;
  terms.reserve(vocab.size());
  for (auto& [term, id] : vocab) {
    id = static_cast<std::uint32_t>(terms.size());
    terms.push_back(term);
  }

  const std::size_t K = params.topics;
  const std::size_t V = terms.size();
  const std::size_t D = kept.size();
  std::vector<std::vector<std::uint32_t>> words(D), z(D);
  std::vector<std::uint32_t> n_dk(D * K, 0), n_kw(K * V, 0), n_k(K, 0);
  Rng rng(splitmix64(params.seed));
  for (std::size_t d = 0; d < D; ++d) {
    for (auto t : kept[d]) {
      std::uint32_t w = vocab.find(t)->second;
      auto k = static_cast<std::uint32_t>(rng.below(K));
      words[d].push_back(w);
      z[d].push_back(k);
      ++n_dk[d * K + k];
      ++n_kw[k * V + w];
      ++n_k[k];
    }
  }

  const double vbeta = static_cast<double>(V) * params.beta;
  std::vector<double> cdf(K);
  for (int it = 0; it < params.iterations; ++it) {
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t i = 0; i < words[d].size(); ++i) {
        const std::uint32_t w = words[d][i];
        std::uint32_t k = z[d][i];
        --n_dk[d * K + k];
        --n_kw[k * V + w];
        --n_k[k];
        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          total += (n_dk[d * K + t] + params.alpha) * (n_kw[t * V + w] + params.beta) /
                   (n_k[t] + vbeta);
          cdf[t] = total;
        }
        const double u = rng.uniform() * total;
        k = 0;
        while (k + 1 < K && cdf[k] <= u) ++k;
        z[d][i] = k;
        ++n_dk[d * K + k];
        ++n_kw[k * V + w];
        ++n_k[k];
      }
    }
  }

  LdaResult result;
  result.topics.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto& topic = result.topics[k];
    topic.topic_id = k;
    topic.terms.reserve(V);
    for (std::size_t w = 0; w < V; ++w) {
      topic.terms.push_back({terms[w], (n_kw[k * V + w] + params.beta) / (n_k[k] + vbeta)});
    }
    std::sort(topic.terms.begin(), topic.terms.end(), by_weight);
  }
  for (std::size_t d = 0; d < D; ++d) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (n_dk[d * K + k] > n_dk[d * K + best]) best = k;
    }
    ++result.topics[best].support;
  }
  result.assignments = std::move(z);
  return result;
}

std::vector<BurstTerm> burstiness(std::span<const PostPtr> current,
                                  std::span<const PostPtr> baseline, const Stopwords* drop) {
  Counts now = count_terms(current, drop);
  Counts before = count_terms(baseline, drop);
  std::vector<BurstTerm> out;
  out.reserve(now.size());
  for (const auto& [term, c] : now) {
    auto it = before.find(term);
    std::size_t b = it == before.end() ? 0 : it->second;
    out.push_back({term, c, b, static_cast<double>(c + 1) / static_cast<double>(b + 1)});
  }
  std::sort(out.begin(), out.end(), [](const BurstTerm& a, const BurstTerm& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.current != b.current) return a.current > b.current;
    return a.term < b.term;
  });
  return out;
}

std::vector<TopicSummary> trending_topics(std::span<const PostPtr> current,
                                          std::span<const PostPtr> baseline, std::size_t k,
                                          const LdaParams& params, const Stopwords* drop) {
  auto bursts = burstiness(current, baseline, drop);
  if (bursts.empty()) return {};
  std::map<std::string_view, double> score;
  for (const auto& b : bursts) score.emplace(b.term, b.score);

  std::vector<std::pair<double, TopicSummary>> ranked;
  try {
    LdaResult fit = lda_fit(current, params, drop);
    for (auto& topic : fit.topics) {
      double mass = 0.0;
      for (auto& wt : topic.terms) {
        wt.weight *= score.at(wt.term);
        mass += wt.weight;
      }
      for (auto& wt : topic.terms) wt.weight /= mass;
      std::sort(topic.terms.begin(), topic.terms.end(), by_weight);
      ranked.emplace_back(mass, std::move(topic));
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCorpusTooSmall) throw;
    TopicSummary single;
    double mass = 0.0;
    for (const auto& b : bursts) mass += b.score;
    for (const auto& b : bursts) single.terms.push_back({b.term, b.score / mass});
    single.support = current.size();
    ranked.emplace_back(mass, std::move(single));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<TopicSummary> out;
  out.reserve(ranked.size());
  for (auto& [mass, topic] : ranked) {
    if (topic.terms.size() > k) topic.terms.resize(k);
    out.push_back(std::move(topic));
  }
  return out;
}

}  // namespace smart
