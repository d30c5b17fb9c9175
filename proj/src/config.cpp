#include "smart/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "smart/error.hpp"

namespace smart {
namespace {

using json = nlohmann::json;

struct Field {
  const char* path;  // dotted
  const char* env;
};

constexpr Field kFields[] = {
    {"port", "SMART_PORT"},
    {"data_dir", "SMART_DATA_DIR"},
    {"grid_res_deg", "SMART_GRID_RES_DEG"},
    {"bin_width_s", "SMART_BIN_WIDTH_S"},
    {"learner.seed", "SMART_LEARNER_SEED"},
    {"anomaly.alpha", "SMART_ANOMALY_ALPHA"},
    {"anomaly.z", "SMART_ANOMALY_Z"},
    {"anomaly.min_count", "SMART_ANOMALY_MIN_COUNT"},
    {"anomaly.warmup", "SMART_ANOMALY_WARMUP"},
};

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + why);
}

json::json_pointer pointer(std::string_view dotted) {
  std::string p = "/";
  for (char c : dotted) p += c == '.' ? '/' : c;
  return json::json_pointer(p);
}

void reject_unknown(const json& j) {
  static const std::set<std::string> top = {"port", "data_dir", "grid_res_deg", "bin_width_s",
                                            "learner", "anomaly"};
  static const std::set<std::string> learner = {"seed"};
  static const std::set<std::string> anomaly = {"alpha", "z", "min_count", "warmup"};
  for (const auto& [k, v] : j.items()) {
    if (!top.contains(k)) bad(k, "unknown field");
  }
  for (const auto& [name, allowed] :
       {std::pair{"learner", &learner}, std::pair{"anomaly", &anomaly}}) {
    if (!j.contains(name)) continue;
    if (!j[name].is_object()) bad(name, "expected an object");
    for (const auto& [k, v] : j[name].items()) {
      if (!allowed->contains(k)) bad(std::string(name) + "." + k, "unknown field");
    }
  }
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) bad(field, "expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  bad(field, "expected an integer");
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

Config parse_config(const json& input, const EnvLookup& env) {
  if (!input.is_object()) bad("config", "expected a JSON object");
  reject_unknown(input);
  json j = input;
  for (const auto& f : kFields) {
    auto value = env ? env(f.env) : std::nullopt;
    if (!value) continue;
    if (std::string_view(f.path) == "data_dir") {
      j[pointer(f.path)] = *value;
      continue;
    }
    json parsed = json::parse(*value, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_number()) bad(f.path, std::string(f.env) + " is not a number");
    j[pointer(f.path)] = parsed;
  }

  Config c;
  auto get = [&](const char* path) -> const json* {
    auto ptr = pointer(path);
    return j.contains(ptr) ? &j.at(ptr) : nullptr;
  };
  if (auto v = get("port")) c.port = static_cast<int>(integer(*v, "port"));
  if (auto v = get("data_dir")) {
    if (!v->is_string()) bad("data_dir", "expected a string");
    c.data_dir = v->get<std::string>();
  }
  if (auto v = get("grid_res_deg")) c.grid_res_deg = number(*v, "grid_res_deg");
  if (auto v = get("bin_width_s")) c.bin_width_s = integer(*v, "bin_width_s");
  if (auto v = get("learner.seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      bad("learner.seed", "expected a non-negative integer");
    }
    c.learner_seed = v->get<std::uint64_t>();
  }
  if (auto v = get("anomaly.alpha")) c.anomaly_alpha = number(*v, "anomaly.alpha");
  if (auto v = get("anomaly.z")) c.anomaly.z_threshold = number(*v, "anomaly.z");
  if (auto v = get("anomaly.min_count")) c.anomaly.min_count = number(*v, "anomaly.min_count");
  if (auto v = get("anomaly.warmup")) {
    auto w = integer(*v, "anomaly.warmup");
    if (w < 0) bad("anomaly.warmup", "must be >= 0");
    c.anomaly.warmup = static_cast<std::uint64_t>(w);
  }
  validate(c);
  return c;
}

void validate(const Config& c) {
  if (c.port < 0 || c.port > 65535) bad("port", "must be in [0, 65535]");
  if (!(c.grid_res_deg > 0.0) || c.grid_res_deg > 90.0) bad("grid_res_deg", "must be in (0, 90]");
  if (c.bin_width_s <= 0) bad("bin_width_s", "must be > 0");
  if (!(c.anomaly_alpha > 0.0) || c.anomaly_alpha > 1.0) bad("anomaly.alpha", "must be in (0, 1]");
  if (!(c.anomaly.z_threshold > 0.0) || !std::isfinite(c.anomaly.z_threshold)) {
    bad("anomaly.z", "must be > 0");
  }
  if (!(c.anomaly.min_count >= 0.0) || !std::isfinite(c.anomaly.min_count)) {
    bad("anomaly.min_count", "must be >= 0");
  }
}

Config load_config(const std::string& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) bad("config", "malformed JSON in " + path);
  return parse_config(j, env);
}

}  // namespace smart
