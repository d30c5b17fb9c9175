#include "smart/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "smart/error.hpp"
#include "smart/random.hpp"

namespace smart {
namespace {

using json = nlohmann::json;

constexpr std::array kWeatherWords = {
    "snow",      "rain",      "sleet",     "storm",    "forecast",  "wind",      "blizzard",
    "weather",   "advisory",  "flurries",  "icy",      "freezing",  "temperatures",
    "inches",    "plows",     "slush",     "hail",     "thunder",   "lightning", "flood",
    "flooding",  "gusts",     "visibility", "drizzle", "overcast",  "frost",     "chill",
    "degrees",   "nws",       "#snowday",  "#nycweather", "#weather", "#storm",  "shoveling",
    "whiteout",  "accumulation", "warning", "watch",   "delays",    "roads",     "salt",
    "precipitation", "cold",  "winter",    "#c2c",     "noaa",      "radar",     "umbrella"};

constexpr std::array kOtherWords = {
    "job",       "hiring",    "career",    "apply",     "developer", "java",      "risk",
    "specialist", "banking",  "legal",     "assessment", "senior",   "analyst",   "sales",
    "#hiring",   "#job",      "#careerarc", "resume",   "interview", "salary",    "office",
    "pizza",     "brunch",    "coffee",    "restaurant", "menu",     "dinner",    "burger",
    "music",     "album",     "concert",   "playlist",  "song",      "tickets",   "show",
    "game",      "score",     "knicks",    "nets",      "rangers",   "season",    "playoffs",
    "election",  "senate",    "mayor",     "vote",      "policy",    "budget",    "tax",
    "movie",     "netflix",   "episode",   "series",    "trailer",   "actor",     "premiere",
    "crypto",    "stocks",    "market",    "invest",    "startup",   "funding",   "founder",
    "gym",       "workout",   "yoga",      "fitness",   "marathon",  "training",  "pray",
    "fashion",   "sale",      "shoes",     "style",     "#ootd",     "designer",  "brand",
    "phone",     "app",       "update",    "laptop",    "wifi",      "battery",   "code"};

constexpr std::array kSharedWords = {
    "the",       "and",       "is",        "to",        "in",        "of",        "for",
    "on",        "it",        "my",        "we",        "you",       "this",      "that",
    "at",        "with",      "today",     "tonight",   "tomorrow",  "morning",   "night",
    "new",       "york",      "nyc",       "city",      "brooklyn",  "manhattan", "queens",
    "people",    "time",      "day",       "week",      "going",     "like",      "just",
    "get",       "out",       "now",       "love",      "good",      "great",     "still",
    "can",       "all",       "so",        "be",        "are",       "here",      "lol",
    "#nyc",      "#newyork",  "home",      "work",      "friends",   "family",    "way",
    "big",       "first",     "last",      "see",       "check",     "know",      "need"};

// Skewed pick: low indices are more frequent (roughly Zipf-like).
template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& words) {
  double u = rng.uniform();
  return words[static_cast<std::size_t>(u * u * static_cast<double>(N))];
}

std::string make_text(Rng& rng, bool relevant, const CorpusOptions& options) {
  const std::size_t length = 5 + rng.below(10);
  std::string text;
  for (std::size_t i = 0; i < length; ++i) {
    double u = rng.uniform();
    const char* word;
    if (u < options.signal_rate) {
      word = relevant ? pick(rng, kWeatherWords) : pick(rng, kOtherWords);
    } else if (u < options.signal_rate + options.crossover_rate) {
      word = relevant ? pick(rng, kOtherWords) : pick(rng, kWeatherWords);
    } else {
      word = pick(rng, kSharedWords);
    }
    if (!text.empty()) text += ' ';
    text += word;
  }
  if (rng.chance(0.3)) text += " https://t.co/" + std::to_string(rng.next() % 100000000);
  return text;
}

std::string make_user(Rng& rng) {
  static constexpr char kAlphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::string user;
  std::size_t n = 6 + rng.below(5);
  for (std::size_t i = 0; i < n; ++i) user += kAlphabet[rng.below(sizeof kAlphabet - 1)];
  return user;
}

}  // namespace

void validate(const CorpusOptions& options) {
  if (options.posts < 10) throw Error(ErrorCode::kInvalidArgument, "posts must be >= 10");
  if (!(options.relevant_frac > 0.0 && options.relevant_frac < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "relevant-frac must be in (0,1)");
  }
  if (options.signal_rate < 0.0 || options.crossover_rate < 0.0 ||
      options.signal_rate + options.crossover_rate > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "signal/crossover rates");
  }
  if (options.span_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "span must be positive");
  const auto& b = options.bbox;
  if (!(b.lat_min < b.lat_max && b.lon_min < b.lon_max) || b.lat_min < -90 || b.lat_max > 90 ||
      b.lon_min < -180 || b.lon_max > 180) {
    throw Error(ErrorCode::kInvalidArgument, "bbox");
  }
}

std::vector<GoldPost> generate_corpus(const CorpusOptions& options) {
  validate(options);
  Rng rng(splitmix64(options.seed));
  const auto n_rel = static_cast<std::size_t>(
      std::llround(options.relevant_frac * static_cast<double>(options.posts)));

  std::vector<bool> relevant(options.posts, false);
  std::fill(relevant.begin(), relevant.begin() + static_cast<std::ptrdiff_t>(n_rel), true);
  for (std::size_t i = relevant.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    bool tmp = relevant[i - 1];
    relevant[i - 1] = relevant[j];
    relevant[j] = tmp;
  }

  std::vector<std::int64_t> offsets(options.posts);
  for (auto& off : offsets) off = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(options.span_ms)));
  std::sort(offsets.begin(), offsets.end());

  std::vector<GoldPost> out;
  out.reserve(options.posts);
  for (std::size_t i = 0; i < options.posts; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "p%07zu", i + 1);
    std::string text = make_text(rng, relevant[i], options);
    std::optional<GeoPoint> geo;
    if (rng.chance(options.geo_frac)) {
      // Quantized to 1e-6 degrees so the values survive text round trips.
      double lat = std::round(rng.uniform(options.bbox.lat_min, options.bbox.lat_max) * 1e6) / 1e6;
      double lon = std::round(rng.uniform(options.bbox.lon_min, options.bbox.lon_max) * 1e6) / 1e6;
      geo = GeoPoint{lat, lon};
    }
    std::optional<std::string> profile_loc;
    if (!geo && rng.chance(0.5)) profile_loc = "New York, NY";
    Post post = make_post(id, Timestamp{options.start.ms + offsets[i]}, make_user(rng),
                          std::move(text), geo, std::move(profile_loc));
    out.push_back({std::make_shared<const Post>(std::move(post)), relevant[i]});
  }
  return out;
}

void write_corpus(std::ostream& out, const std::vector<GoldPost>& corpus) {
  for (const auto& g : corpus) {
    json obj = json::parse(serialize_post(*g.post));
    obj["label"] = g.relevant ? "relevant" : "not_relevant";
    out << obj.dump() << '\n';
  }
}

GoldPost parse_gold_post(std::string_view line) {
  Post post = parse_post(line);
  json obj = json::parse(line.begin(), line.end());
  auto it = obj.find("label");
  if (it == obj.end() || !it->is_string()) throw Error(ErrorCode::kMissingField, "label");
  auto cls = parse_label_class(it->get<std::string>());
  if (!cls || *cls == LabelClass::kCantDecide) {
    throw Error(ErrorCode::kInvalidArgument, "label must be relevant or not_relevant");
  }
  return {std::make_shared<const Post>(std::move(post)), *cls == LabelClass::kRelevant};
}

std::vector<GoldPost> load_gold_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path);
  std::vector<GoldPost> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      out.push_back(parse_gold_post(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace smart
