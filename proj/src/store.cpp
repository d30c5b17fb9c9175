#include "smart/store.hpp"

#include <bit>
#include <cstring>
#include <unordered_map>

#include <json.hpp>

#include "smart/base64.hpp"
#include "smart/codec.hpp"
#include "smart/error.hpp"

namespace smart {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Truncates everything after the last newline. Returns the number of bytes
// dropped.
std::uintmax_t drop_torn_tail(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return 0;
  std::uintmax_t size = fs::file_size(path, ec);
  if (ec || size == 0) return 0;
  std::ifstream in(path, std::ios::binary);
  // Scan backwards in blocks for the last '\n'.
  constexpr std::uintmax_t kBlock = 4096;
  std::uintmax_t end = size;
  std::string buf;
  std::uintmax_t keep = 0;
  bool found = false;
  while (end > 0 && !found) {
    std::uintmax_t start = end > kBlock ? end - kBlock : 0;
    buf.resize(end - start);
    in.seekg(static_cast<std::streamoff>(start));
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    auto pos = buf.rfind('\n');
    if (pos != std::string::npos) {
      keep = start + pos + 1;
      found = true;
    }
    end = start;
  }
  if (keep == size) return 0;
  in.close();
  fs::resize_file(path, keep, ec);
  if (ec) throw Error(ErrorCode::kIoError, path.string() + ": " + ec.message());
  return size - keep;
}

std::ofstream open_append(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return out;
}

void write_line(std::ofstream& out, const std::string& line, const fs::path& path) {
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

template <class F>
void for_each_line(const fs::path& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    f(n, line);
  }
}

void put_floats(base64::Encoder& enc, const float* data, std::size_t count) {
  std::uint8_t bytes[4 * 64];
  while (count > 0) {
    std::size_t n = std::min<std::size_t>(count, 64);
    for (std::size_t i = 0; i < n; ++i) {
      auto bits = std::bit_cast<std::uint32_t>(data[i]);
      for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    enc.write(std::span<const std::uint8_t>(bytes, 4 * n));
    data += n;
    count -= n;
  }
}

float get_float(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::vector<std::uint8_t> decode_field(const json& j, const char* field, std::size_t floats) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::kCorruptSnapshot, std::string("missing ") + field);
  }
  auto bytes = base64::decode(it->get_ref<const std::string&>());
  if (!bytes) throw Error(ErrorCode::kCorruptSnapshot, std::string("bad base64 in ") + field);
  if (bytes->size() != floats * 4) {
    throw Error(ErrorCode::kCorruptSnapshot,
                std::string(field) + " has " + std::to_string(bytes->size() / 4) +
                    " values, expected " + std::to_string(floats));
  }
  return std::move(*bytes);
}

void fill(std::vector<float>& dst, const std::vector<std::uint8_t>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = get_float(src.data() + 4 * i);
}

}  // namespace

void write_snapshot(std::ostream& out, const ModelState& model) {
  const auto& net = model.net;
  const auto shape = net.shape();
  out << "{\"filter_id\":" << json(model.filter_id).dump() << ",\"D\":" << shape.input_dim
      << ",\"H\":" << shape.hidden << ",\"seed\":" << model.seed
      << ",\"n_labels_seen\":" << model.n_labels_seen << ",\"version\":" << model.version;

  std::string chunk;
  base64::Encoder enc(chunk);
  std::vector<float> row(shape.hidden);
  out << ",\"W1\":\"";
  const auto& rows = net.stored_rows();
  for (std::uint32_t r = 0; r < shape.input_dim; ++r) {
    auto it = rows.find(r);
    if (it != rows.end()) {
      put_floats(enc, it->second.data(), shape.hidden);
    } else {
      for (std::uint32_t j = 0; j < shape.hidden; ++j) row[j] = net.initial_w1(r, j);
      put_floats(enc, row.data(), shape.hidden);
    }
    if (chunk.size() > (1u << 16)) {
      out << chunk;
      chunk.clear();
    }
  }
  enc.finish();
  out << chunk << '"';

  auto dense = [&](const char* name, const std::vector<float>& v) {
    std::string s;
    base64::Encoder e(s);
    put_floats(e, v.data(), v.size());
    e.finish();
    out << ",\"" << name << "\":\"" << s << '"';
  };
  dense("b1", net.b1());
  dense("W2", net.w2());
  dense("b2", net.b2());
  out << "}\n";
}

ModelState read_snapshot(std::istream& in, const NetworkShape& expected) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptSnapshot, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kCorruptSnapshot, "not an object");
  auto field = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end()) throw Error(ErrorCode::kCorruptSnapshot, std::string("missing ") + name);
    return *it;
  };
  auto uint_field = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_number_unsigned()) throw Error(ErrorCode::kCorruptSnapshot, name);
    return v.get<std::uint64_t>();
  };
  const json& id = field("filter_id");
  if (!id.is_string()) throw Error(ErrorCode::kCorruptSnapshot, "filter_id");
  NetworkShape shape{static_cast<std::uint32_t>(uint_field("D")),
                     static_cast<std::uint32_t>(uint_field("H"))};
  if (!(shape == expected)) {
    throw Error(ErrorCode::kCorruptSnapshot,
                "shape " + std::to_string(shape.input_dim) + "x" + std::to_string(shape.hidden) +
                    ", expected " + std::to_string(expected.input_dim) + "x" +
                    std::to_string(expected.hidden));
  }
  ModelState model(id.get<std::string>(), uint_field("seed"), shape);
  model.n_labels_seen = uint_field("n_labels_seen");
  model.version = uint_field("version");

  const std::size_t h = shape.hidden;
  {
    auto w1 = decode_field(j, "W1", static_cast<std::size_t>(shape.input_dim) * h);
    j.erase("W1");
    // Only rows that moved away from their initial value are kept.
    for (std::uint32_t r = 0; r < shape.input_dim; ++r) {
      const std::uint8_t* p = w1.data() + static_cast<std::size_t>(r) * h * 4;
      bool moved = false;
      for (std::uint32_t c = 0; c < h && !moved; ++c) {
        moved = std::bit_cast<std::uint32_t>(get_float(p + 4 * c)) !=
                std::bit_cast<std::uint32_t>(model.net.initial_w1(r, c));
      }
      if (!moved) continue;
      auto& row = model.net.mutable_w1_row(r);
      for (std::uint32_t c = 0; c < h; ++c) row[c] = get_float(p + 4 * c);
    }
  }
  fill(model.net.b1(), decode_field(j, "b1", h));
  fill(model.net.w2(), decode_field(j, "W2", h * kNumClasses));
  fill(model.net.b2(), decode_field(j, "b2", kNumClasses));
  return model;
}

ModelState load_model(const fs::path& path, const std::string& filter_id, std::uint64_t seed,
                      const NetworkShape& shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (fs::exists(path, ec)) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
    return ModelState(filter_id, seed, shape);
  }
  return read_snapshot(in, shape);
}

void atomic_write(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "rename " + tmp.string() + ": " + ec.message());
}

DataStore::DataStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_ / "models", ec);
  if (ec) throw Error(ErrorCode::kIoError, dir_.string() + ": " + ec.message());

  for (const auto& path : {posts_path(), labels_path()}) {
    if (auto dropped = drop_torn_tail(path); dropped > 0) {
      warnings_.push_back(path.filename().string() + ": dropped torn final line (" +
                          std::to_string(dropped) + " bytes)");
    }
  }
  for_each_line(posts_path(), [&](std::size_t, const std::string& line) {
    try {
      post_ids_.insert(parse_post(line).id);
    } catch (const Error&) {
    }
  });
  posts_out_ = open_append(posts_path());
  labels_out_ = open_append(labels_path());
}

void DataStore::append_post(const Post& post) {
  std::lock_guard lock(posts_mu_);
  if (post_ids_.contains(post.id)) throw Error(ErrorCode::kDuplicateId, post.id);
  write_line(posts_out_, serialize_post(post), posts_path());
  post_ids_.insert(post.id);
}

void DataStore::append_label(const LabelRecord& label) {
  std::lock_guard lock(labels_mu_);
  write_line(labels_out_, codec::label_json(label).dump(), labels_path());
}

void DataStore::save_filters(const std::vector<StoredFilter>& filters) {
  json arr = json::array();
  for (const auto& f : filters) arr.push_back(codec::stored_filter_json(f));
  atomic_write(filters_path(), json{{"filters", std::move(arr)}}.dump(2) + "\n");
}

void DataStore::save_model(const ModelState& model) {
  fs::path path = model_path(model.filter_id);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    write_snapshot(out, model);
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "rename " + tmp.string() + ": " + ec.message());
}

LoadedState DataStore::load(std::uint64_t learner_seed, const TrainOptions& options) {
  LoadedState state;
  state.warnings = warnings_;

  std::unordered_map<std::string, PostPtr> by_id;
  for_each_line(posts_path(), [&](std::size_t n, const std::string& line) {
    try {
      auto post = std::make_shared<const Post>(parse_post(line));
      if (!by_id.emplace(post->id, post).second) {
        state.warnings.push_back("posts.ndjson:" + std::to_string(n) + ": duplicate id " + post->id);
        return;
      }
      state.posts.push_back(std::move(post));
    } catch (const Error& e) {
      state.warnings.push_back("posts.ndjson:" + std::to_string(n) + ": " + e.what());
    }
  });

  std::error_code ec;
  if (fs::exists(filters_path(), ec)) {
    std::ifstream in(filters_path(), std::ios::binary);
    try {
      json j = json::parse(in);
      for (const auto& f : j.at("filters")) {
        StoredFilter sf{compile_filter(codec::filter_def_from_json(f)),
                        f.at("version").get<std::uint64_t>()};
        state.filters.push_back(std::move(sf));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIoError, "filters.json: " + std::string(e.what()));
    } catch (const Error& e) {
      throw Error(ErrorCode::kIoError, "filters.json: " + std::string(e.what()));
    }
  }

  std::map<std::string, std::vector<LabelRecord>> per_filter;
  for (const auto& f : state.filters) per_filter[f.filter.id];
  for_each_line(labels_path(), [&](std::size_t n, const std::string& line) {
    std::string where = "labels.ndjson:" + std::to_string(n) + ": ";
    LabelRecord label;
    try {
      label = codec::label_from_json(json::parse(line));
    } catch (const json::exception& e) {
      state.warnings.push_back(where + e.what());
      return;
    } catch (const Error& e) {
      state.warnings.push_back(where + e.what());
      return;
    }
    auto it = per_filter.find(label.filter_id);
    if (it == per_filter.end()) {
      state.warnings.push_back(where + "unknown filter " + label.filter_id);
      return;
    }
    if (!by_id.contains(label.post_id)) {
      state.warnings.push_back(where + "unknown post " + label.post_id);
      return;
    }
    it->second.push_back(label);
    state.label_log.push_back(std::move(label));
  });

  PostResolver resolve = [&](std::string_view id) -> PostPtr {
    auto it = by_id.find(std::string(id));
    return it == by_id.end() ? nullptr : it->second;
  };
  for (const auto& [filter_id, labels] : per_filter) {
    const std::uint64_t seed = model_seed_for(filter_id, learner_seed);
    const std::uint64_t replay_version = 1 + labels.size();
    if (fs::exists(model_path(filter_id), ec)) {
      auto model = std::make_shared<ModelState>(load_model(model_path(filter_id), filter_id, seed));
      for (const auto& l : labels) state.labels.put(l);
      if (model->version != replay_version) {
        state.warnings.push_back("model " + filter_id + ": snapshot version " +
                                 std::to_string(model->version) + " != label replay version " +
                                 std::to_string(replay_version) + ", using snapshot");
      }
      if (model->seed != seed) {
        state.warnings.push_back("model " + filter_id + ": snapshot seed differs from configured seed");
      }
      state.models[filter_id] = std::move(model);
      continue;
    }
    ModelState model(filter_id, seed);
    for (const auto& l : labels) model = add_label(model, state.labels, l, resolve, options);
    state.models[filter_id] = std::make_shared<const ModelState>(std::move(model));
  }
  return state;
}

}  // namespace smart
