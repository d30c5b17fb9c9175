#include "smart/codec.hpp"

#include "smart/error.hpp"

namespace smart::codec {
namespace {

std::vector<std::string> string_list(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_array()) {
    throw Error(ErrorCode::kInvalidFilter, std::string(field) + " must be an array of strings");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw Error(ErrorCode::kInvalidFilter, std::string(field) + " must be an array of strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

json post_json(const Post& post) {
  json j = {{"id", post.id}, {"ts", format_iso8601(post.ts)}, {"user", post.user},
            {"text", post.text}};
  if (post.geo) {
    j["lat"] = post.geo->lat;
    j["lon"] = post.geo->lon;
  }
  if (post.profile_loc) j["profile_loc"] = *post.profile_loc;
  return j;
}

json filter_json(const KeywordFilter& filter) {
  FilterDef def = to_def(filter);
  return {{"id", def.id}, {"name", def.name}, {"include", def.include}, {"exclude", def.exclude}};
}

json stored_filter_json(const StoredFilter& filter) {
  json j = filter_json(filter.filter);
  j["version"] = filter.version;
  return j;
}

FilterDef filter_def_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidFilter, "expected a JSON object");
  FilterDef def;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) throw Error(ErrorCode::kInvalidFilter, "id");
  def.id = id->get<std::string>();
  if (auto name = j.find("name"); name != j.end() && name->is_string()) {
    def.name = name->get<std::string>();
  }
  def.include = string_list(j, "include");
  def.exclude = string_list(j, "exclude");
  return def;
}

json label_json(const LabelRecord& label) {
  return {{"post_id", label.post_id},
          {"filter_id", label.filter_id},
          {"class", std::string(to_string(label.label))},
          {"ts", format_iso8601(label.ts)}};
}

LabelRecord label_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kMalformedJson, "expected a JSON object");
  auto str = [&](const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) throw Error(ErrorCode::kMissingField, field);
    if (!it->is_string()) throw Error(ErrorCode::kMalformedJson, std::string(field) + " must be a string");
    return it->get<std::string>();
  };
  LabelRecord label;
  label.post_id = str("post_id");
  label.filter_id = str("filter_id");
  std::string cls = str("class");
  auto parsed = parse_label_class(cls);
  if (!parsed) throw Error(ErrorCode::kInvalidArgument, "class '" + cls + "'");
  label.label = *parsed;
  if (auto it = j.find("ts"); it != j.end() && it->is_string()) {
    auto ts = parse_iso8601(it->get<std::string>());
    if (!ts) throw Error(ErrorCode::kBadTimestamp, it->get<std::string>());
    label.ts = *ts;
  }
  return label;
}

json score_json(const RelevanceScore& score) {
  return {{"p_rel", score.p_rel}, {"p_not", score.p_not}, {"p_cant", score.p_cant}};
}

json term_counts_json(std::span<const TermCount> terms) {
  json arr = json::array();
  auto weights = cloud_weights(terms);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    arr.push_back({{"term", terms[i].term}, {"count", terms[i].count}, {"weight", weights[i]}});
  }
  return arr;
}

json topic_json(const TopicSummary& topic, std::size_t top) {
  json terms = json::array();
  for (std::size_t i = 0; i < topic.terms.size() && i < top; ++i) {
    terms.push_back(json::array({topic.terms[i].term, topic.terms[i].weight}));
  }
  return {{"topic_id", topic.topic_id}, {"support", topic.support}, {"terms", std::move(terms)}};
}

json river_json(const RiverSeries& river) {
  json bins = json::array();
  for (auto b : river.bins) bins.push_back(format_iso8601(b));
  json series = json::object();
  for (const auto& [id, counts] : river.series) series[id] = counts;
  return {{"bin_width_s", river.bin_width_ms / 1000.0},
          {"bins", std::move(bins)},
          {"series", std::move(series)},
          {"unmatched", river.unmatched}};
}

json anomaly_json(const AnomalyEvent& event) {
  return {{"term", event.term},   {"scope", event.scope}, {"bin_start", format_iso8601(event.bin_start)},
          {"count", event.count}, {"z", event.z},         {"samples", event.samples}};
}

}  // namespace smart::codec
