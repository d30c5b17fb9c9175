#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "smart/filter.hpp"
#include "smart/ingest.hpp"
#include "smart/learner.hpp"

namespace smart {

// Everything a service needs to resume.
struct LoadedState {
  std::vector<PostPtr> posts;  // append order
  std::vector<StoredFilter> filters;
  LabelStore labels;
  std::vector<LabelRecord> label_log;  // accepted records, append order
  std::map<std::string, std::shared_ptr<const ModelState>> models;
  std::vector<std::string> warnings;
};

// On-disk layout under one directory:
//   posts.ndjson, labels.ndjson   append-only
//   filters.json                  rewritten atomically
//   models/<filter_id>.snap       rewritten atomically
// Opening repairs a torn final line in either log.
class DataStore {
 public:
  // Creates the directory if needed. Throws Error(kIoError).
  explicit DataStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  // Throws Error(kDuplicateId) if the id was already appended.
  void append_post(const Post& post);
  void append_label(const LabelRecord& label);
  void save_filters(const std::vector<StoredFilter>& filters);
  void save_model(const ModelState& model);

  // Reads posts, filters and labels, and rebuilds one model per filter.
  // A snapshot takes precedence over label replay; a version mismatch
  // between the two is reported as a warning.
  LoadedState load(std::uint64_t learner_seed, const TrainOptions& options = {});

  // Repairs done on open (torn tails), one entry each.
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::filesystem::path posts_path() const { return dir_ / "posts.ndjson"; }
  std::filesystem::path labels_path() const { return dir_ / "labels.ndjson"; }
  std::filesystem::path filters_path() const { return dir_ / "filters.json"; }
  std::filesystem::path model_path(const std::string& filter_id) const {
    return dir_ / "models" / (filter_id + ".snap");
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> warnings_;
  std::mutex posts_mu_;
  std::mutex labels_mu_;
  std::ofstream posts_out_;
  std::ofstream labels_out_;
  std::unordered_set<std::string> post_ids_;
};

// Snapshot encoding: one JSON object holding the header fields and the
// weights as base64 little-endian float32, W1 stored densely.
void write_snapshot(std::ostream& out, const ModelState& model);
// Throws Error(kCorruptSnapshot) on malformed input or a shape mismatch.
ModelState read_snapshot(std::istream& in, const NetworkShape& expected = {});

// Missing file → fresh model seeded with `seed`.
ModelState load_model(const std::filesystem::path& path, const std::string& filter_id,
                      std::uint64_t seed, const NetworkShape& shape = {});

// Writes via a temporary sibling and rename.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

inline LoadedState load_all(const std::filesystem::path& dir, std::uint64_t learner_seed) {
  DataStore store(dir);
  return store.load(learner_seed);
}

}  // namespace smart
