#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tokscale {

// Base for every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument or configuration was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data could not be read or decoded.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A 64-bit counter would have wrapped.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// Training ran out of candidates before reaching the requested size.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t achieved_size)
      : Error(what), achieved_size_(achieved_size) {}

  std::size_t achieved_size() const noexcept { return achieved_size_; }

 private:
  std::size_t achieved_size_;
};

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) {
    throw OverflowError("64-bit count overflow");
  }
  return out;
}

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw OverflowError("64-bit count overflow");
  }
  return out;
}

}  // namespace tokscale
