#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <string_view>

#include "sensekern/error.hpp"

namespace sensekern {

// 32-byte SHA-256 digest identifying a kernel spec, vocabulary or corpus.
class Fingerprint {
 public:
  using Bytes = std::array<std::uint8_t, 32>;

  Fingerprint() { bytes_.fill(0); }
  explicit Fingerprint(const Bytes& bytes) : bytes_(bytes) {}

  const Bytes& bytes() const { return bytes_; }

  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : bytes_) {
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xF]);
    }
    return out;
  }

  static Fingerprint from_hex(std::string_view hex) {
    if (hex.size() != 64) throw DataError("fingerprint must be 64 hex digits");
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw DataError("invalid hex digit in fingerprint");
    };
    Bytes b;
    for (std::size_t i = 0; i < 32; ++i) {
      b[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
    }
    return Fingerprint(b);
  }

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  Bytes bytes_;
};

// Incremental SHA-256 over arbitrary byte strings.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }

  Hasher& update(std::string_view data) {
    EVP_DigestUpdate(ctx_.get(), data.data(), data.size());
    return *this;
  }

  // Length-prefixed field, so ("ab","c") and ("a","bc") hash differently.
  Hasher& field(std::string_view data) {
    std::uint64_t n = data.size();
    std::uint8_t len[8];
    for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(n >> (8 * i));
    EVP_DigestUpdate(ctx_.get(), len, sizeof len);
    return update(data);
  }

  Fingerprint finish() {
    Fingerprint::Bytes out;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    return Fingerprint(out);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Fingerprint sha256(std::string_view data) { return Hasher().update(data).finish(); }

// 64-bit FNV-1a, used to key random substreams by document identifier.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sensekern
