#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sar {

inline constexpr char kToolVersion[] = "0.1.0";

// FNV-1a 64-bit.
inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// Hash of an ordered token list; 0x1f separators so ["ab","c"] != ["a","bc"].
inline std::string vocab_hash(const std::vector<std::string>& vocab) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& v : vocab) {
    h = fnv1a(v, h);
    h ^= 0x1f;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

inline std::string config_hash(const std::string& canonical) {
  return hex64(fnv1a(canonical));
}

}  // namespace sar
