#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "tokscale/error.hpp"

namespace tokscale {

// Incremental SHA-256. Copyable so that a running hash can be snapshotted
// (used for cumulative slice hashes).
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("SHA-256 initialisation failed");
    }
  }

  Sha256(const Sha256& other) : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_MD_CTX_copy_ex(ctx_.get(), other.ctx_.get()) != 1) {
      throw Error("SHA-256 copy failed");
    }
  }
  Sha256& operator=(const Sha256& other) {
    if (this != &other) {
      Sha256 tmp(other);
      std::swap(ctx_, tmp.ctx_);
    }
    return *this;
  }
  Sha256(Sha256&&) noexcept = default;
  Sha256& operator=(Sha256&&) noexcept = default;

  Sha256& update(std::string_view bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
    return *this;
  }

  // Little-endian fixed-width integer, used for length prefixes.
  Sha256& update_u64(std::uint64_t v) {
    std::array<unsigned char, 8> buf;
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    EVP_DigestUpdate(ctx_.get(), buf.data(), buf.size());
    return *this;
  }

  std::array<unsigned char, 32> digest() const {
    Sha256 copy(*this);
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(copy.ctx_.get(), out.data(), &len);
    return out;
  }

  std::string hex() const {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    for (unsigned char b : digest()) {
      s.push_back(kHex[b >> 4]);
      s.push_back(kHex[b & 0xF]);
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view bytes) { return Sha256().update(bytes).hex(); }

}  // namespace tokscale
