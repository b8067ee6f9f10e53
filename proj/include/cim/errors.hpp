#pragma once

#include <stdexcept>
#include <string>

namespace cim {

// Invalid configuration values or schema violations in input files.
// The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures (missing files, unwritable directories).
// The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cim
