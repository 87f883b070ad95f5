#pragma once

#include <stdexcept>
#include <string>

namespace ct3d {

// Malformed on-disk data (bad magic, truncated record, misaligned file).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, detected before any compute starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ct3d
