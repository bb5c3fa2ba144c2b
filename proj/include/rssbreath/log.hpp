#pragma once

// Minimal stderr logger. Verbosity comes from the RSSBREATH_LOG environment
// variable: error | warn | info | debug (default warn).

namespace rssbreath::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level threshold();
bool enabled(Level level);

void errorf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void warnf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void infof(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void debugf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace rssbreath::log
