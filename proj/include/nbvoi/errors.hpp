#pragma once

#include <stdexcept>
#include <string>

namespace nbvoi {

// Rejected input: malformed files, schema violations, bad configuration.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nbvoi
