#pragma once

#include <stdexcept>
#include <string>

namespace sievelab {

/// Raised when an argument violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an observation is too short to carry the posterior support.
class SizingError : public std::runtime_error {
 public:
  SizingError(const std::string& msg, std::size_t required)
      : std::runtime_error(msg), required_(required) {}
  [[nodiscard]] std::size_t required() const noexcept { return required_; }

 private:
  std::size_t required_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace sievelab
