#include "smart/filter.hpp"

#include <algorithm>

#include "smart/error.hpp"
#include "smart/ingest.hpp"

namespace smart {
namespace {

std::vector<Term> compile_terms(const std::vector<std::string>& raw, const char* side) {
  std::vector<Term> out;
  for (const auto& r : raw) {
    Term term;
    term.tokens = tokenize(r);
    if (term.tokens.empty()) {
      throw Error(ErrorCode::kInvalidFilter,
                  std::string("empty ") + side + " term '" + r + "'");
    }
    if (term.tokens.size() > kMaxPhraseTokens) {
      throw Error(ErrorCode::kInvalidFilter,
                  std::string(side) + " phrase longer than 5 tokens: '" + r + "'");
    }
    for (const auto& t : term.tokens) {
      if (!term.text.empty()) term.text += ' ';
      term.text += t;
    }
    if (std::find(out.begin(), out.end(), term) == out.end()) out.push_back(std::move(term));
  }
  return out;
}

std::size_t count_occurrences(const Term& term, std::span<const std::string> tokens) {
  const std::size_t n = term.tokens.size();
  if (n == 0 || tokens.size() < n) return 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    if (std::equal(term.tokens.begin(), term.tokens.end(), tokens.begin() + i)) ++count;
  }
  return count;
}

bool occurs(const Term& term, std::span<const std::string> tokens) {
  const std::size_t n = term.tokens.size();
  if (n == 0 || tokens.size() < n) return false;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    if (std::equal(term.tokens.begin(), term.tokens.end(), tokens.begin() + i)) return true;
  }
  return false;
}

bool excluded(const KeywordFilter& filter, std::span<const std::string> tokens) {
  return std::any_of(filter.exclude.begin(), filter.exclude.end(),
                     [&](const Term& t) { return occurs(t, tokens); });
}

}  // namespace

KeywordFilter compile_filter(const FilterDef& def) {
  if (def.id.empty()) throw Error(ErrorCode::kInvalidFilter, "empty id");
  // Ids name snapshot files, so keep them to a portable filename alphabet.
  for (char c : def.id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) throw Error(ErrorCode::kInvalidFilter, "id may only contain [A-Za-z0-9_.-]");
  }
  if (def.id.front() == '.') throw Error(ErrorCode::kInvalidFilter, "id may not start with '.'");
  if (def.id.size() > 128) throw Error(ErrorCode::kInvalidFilter, "id longer than 128");
  KeywordFilter f;
  f.id = def.id;
  f.name = def.name.empty() ? def.id : def.name;
  f.include = compile_terms(def.include, "include");
  f.exclude = compile_terms(def.exclude, "exclude");
  for (const auto& term : f.include) {
    if (std::find(f.exclude.begin(), f.exclude.end(), term) != f.exclude.end()) {
      throw Error(ErrorCode::kInvalidFilter, "overlap: '" + term.text + "'");
    }
  }
  return f;
}

FilterDef to_def(const KeywordFilter& filter) {
  FilterDef def{filter.id, filter.name, {}, {}};
  for (const auto& t : filter.include) def.include.push_back(t.text);
  for (const auto& t : filter.exclude) def.exclude.push_back(t.text);
  return def;
}

bool matches(const KeywordFilter& filter, std::span<const std::string> tokens) {
  bool hit = std::any_of(filter.include.begin(), filter.include.end(),
                         [&](const Term& t) { return occurs(t, tokens); });
  return hit && !excluded(filter, tokens);
}

std::vector<std::pair<std::string, std::size_t>> matched_terms(
    const KeywordFilter& filter, std::span<const std::string> tokens) {
  std::vector<std::pair<std::string, std::size_t>> out;
  if (excluded(filter, tokens)) return out;
  for (const auto& term : filter.include) {
    if (std::size_t c = count_occurrences(term, tokens); c > 0) out.emplace_back(term.text, c);
  }
  return out;
}

FilterRegistry::FilterRegistry()
    : current_(std::make_shared<const std::map<std::string, StoredFilter>>()) {}

StoredFilter FilterRegistry::upsert(const FilterDef& def) {
  KeywordFilter compiled = compile_filter(def);
  std::lock_guard lock(mu_);
  auto next = std::make_shared<std::map<std::string, StoredFilter>>(*current_);
  auto& slot = (*next)[compiled.id];
  slot.version += 1;
  slot.filter = std::move(compiled);
  StoredFilter result = slot;
  current_ = std::move(next);
  return result;
}

void FilterRegistry::restore(std::vector<StoredFilter> filters) {
  auto next = std::make_shared<std::map<std::string, StoredFilter>>();
  for (auto& f : filters) {
    std::string id = f.filter.id;
    (*next)[id] = std::move(f);
  }
  std::lock_guard lock(mu_);
  current_ = std::move(next);
}

FilterSnapshot FilterRegistry::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::vector<StoredFilter> FilterRegistry::list() const {
  auto snap = snapshot();
  std::vector<StoredFilter> out;
  out.reserve(snap->size());
  for (const auto& [id, f] : *snap) out.push_back(f);
  return out;
}

}  // namespace smart
