#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smart::base64 {

// Incremental RFC 4648 encoder (with padding) appending to a string.
class Encoder {
 public:
  explicit Encoder(std::string& out) : out_(out) {}

  void write(std::span<const std::uint8_t> bytes);
  // Flushes pending bytes and padding.
  void finish();

 private:
  void emit(std::uint32_t triple, int n);

  std::string& out_;
  std::uint8_t pending_[3] = {0, 0, 0};
  int n_pending_ = 0;
};

std::string encode(std::span<const std::uint8_t> bytes);

// Nullopt on invalid characters or length.
std::optional<std::vector<std::uint8_t>> decode(std::string_view text);

}  // namespace smart::base64
