#pragma once

#include <stdexcept>
#include <string>

namespace rssbreath {

// Invalid configuration, invalid arguments, or a processing request the
// current configuration cannot satisfy (e.g. an unrealizable filter).
// The CLI maps this family to exit code 2.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unreadable data files, and runtime data problems such as
// traces too short for the requested analysis. CLI exit code 3.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rssbreath
