#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace pmae {

// Invalid inputs, shapes, config keys, file problems. CLI maps this to exit 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses, failed gradient checks. CLI maps this to exit 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void msg_append(std::ostringstream&) {}
template <typename A, typename... R>
void msg_append(std::ostringstream& os, const A& a, const R&... rest) {
  os << a;
  msg_append(os, rest...);
}
}  // namespace detail

template <typename... A>
std::string msg(const A&... parts) {
  std::ostringstream os;
  detail::msg_append(os, parts...);
  return os.str();
}

template <typename... A>
[[noreturn]] void fail(const A&... parts) {
  throw ValidationError(msg(parts...));
}

template <typename... A>
[[noreturn]] void fail_numeric(const A&... parts) {
  throw NumericError(msg(parts...));
}

template <typename... A>
void require(bool cond, const A&... parts) {
  if (!cond) fail(parts...);
}

}  // namespace pmae
