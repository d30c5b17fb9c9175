#include "smart/base64.hpp"

#include <array>

namespace smart::base64 {
namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<std::int8_t, 256> make_reverse() {
  std::array<std::int8_t, 256> r{};
  for (auto& v : r) v = -1;
  for (int i = 0; i < 64; ++i) r[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
  return r;
}

constexpr auto kReverse = make_reverse();

}  // namespace

void Encoder::emit(std::uint32_t triple, int n) {
  out_.push_back(kAlphabet[(triple >> 18) & 63]);
  out_.push_back(kAlphabet[(triple >> 12) & 63]);
  out_.push_back(n > 1 ? kAlphabet[(triple >> 6) & 63] : '=');
  out_.push_back(n > 2 ? kAlphabet[triple & 63] : '=');
}

void Encoder::write(std::span<const std::uint8_t> bytes) {
  std::size_t i = 0;
  while (n_pending_ != 0 && i < bytes.size()) {
    pending_[n_pending_++] = bytes[i++];
    if (n_pending_ == 3) {
      emit((pending_[0] << 16) | (pending_[1] << 8) | pending_[2], 3);
      n_pending_ = 0;
    }
  }
  for (; i + 3 <= bytes.size(); i += 3) {
    emit((static_cast<std::uint32_t>(bytes[i]) << 16) | (bytes[i + 1] << 8) | bytes[i + 2], 3);
  }
  for (; i < bytes.size(); ++i) pending_[n_pending_++] = bytes[i];
}

void Encoder::finish() {
  if (n_pending_ == 0) return;
  std::uint32_t triple = static_cast<std::uint32_t>(pending_[0]) << 16;
  if (n_pending_ > 1) triple |= static_cast<std::uint32_t>(pending_[1]) << 8;
  emit(triple, n_pending_);
  n_pending_ = 0;
}

std::string encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  Encoder enc(out);
  enc.write(bytes);
  enc.finish();
  return out;
}

std::optional<std::vector<std::uint8_t>> decode(std::string_view text) {
  if (text.size() % 4 != 0) return std::nullopt;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t triple = 0;
    for (int j = 0; j < 4; ++j) {
      char c = text[i + j];
      if (c == '=') {
        // Padding only in the last quad, positions 2 and 3.
        if (i + 4 != text.size() || j < 2) return std::nullopt;
        ++pad;
        triple <<= 6;
        continue;
      }
      if (pad > 0) return std::nullopt;
      std::int8_t v = kReverse[static_cast<unsigned char>(c)];
      if (v < 0) return std::nullopt;
      triple = (triple << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(triple >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(triple >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(triple));
  }
  return out;
}

}  // namespace smart::base64
