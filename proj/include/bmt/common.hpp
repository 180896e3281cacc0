#pragma once

#include <stdexcept>
#include <string>

namespace bmt {

// Thrown for malformed or missing inputs (bad files, dimension mismatches,
// violated preconditions). The CLI maps these to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

}  // namespace bmt
