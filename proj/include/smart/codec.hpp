#pragma once

// JSON encodings shared by the store files and the HTTP API.

#include <span>
#include <string_view>

#include <json.hpp>

#include "smart/anomaly.hpp"
#include "smart/filter.hpp"
#include "smart/ingest.hpp"
#include "smart/learner.hpp"
#include "smart/spatial.hpp"
#include "smart/temporal.hpp"
#include "smart/topics.hpp"

namespace smart::codec {

using json = nlohmann::json;

json post_json(const Post& post);

// {"id","name","include":[...],"exclude":[...]}
json filter_json(const KeywordFilter& filter);
json stored_filter_json(const StoredFilter& filter);  // adds "version"
// Throws Error(kInvalidFilter) when fields are missing or mistyped.
FilterDef filter_def_from_json(const json& j);

// {"post_id","filter_id","class","ts"}
json label_json(const LabelRecord& label);
// Throws Error(kMissingField / kMalformedJson / kInvalidArgument).
LabelRecord label_from_json(const json& j);

json score_json(const RelevanceScore& score);
json term_counts_json(std::span<const TermCount> terms);

// {topic_id, support, terms:[[term,weight],...]}, at most `top` terms.
json topic_json(const TopicSummary& topic, std::size_t top);

// {bin_width_s, bins:[iso...], series:{filter_id:[...]}, unmatched:[...]}
json river_json(const RiverSeries& river);

// {term, scope, bin_start, count, z, samples:[...]}
json anomaly_json(const AnomalyEvent& event);

}  // namespace smart::codec
