#include "rssbreath/log.hpp"

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace rssbreath::log {

namespace {

Level parse_env() {
    const char* v = std::getenv("RSSBREATH_LOG");
    if (v == nullptr) return Level::kWarn;
    if (std::strcmp(v, "error") == 0) return Level::kError;
    if (std::strcmp(v, "warn") == 0) return Level::kWarn;
    if (std::strcmp(v, "info") == 0) return Level::kInfo;
    if (std::strcmp(v, "debug") == 0) return Level::kDebug;
    std::fprintf(stderr, "[rssbreath] unknown RSSBREATH_LOG value '%s', using warn\n", v);
    return Level::kWarn;
}

const char* tag(Level level) {
    switch (level) {
        case Level::kError: return "error";
        case Level::kWarn: return "warn";
        case Level::kInfo: return "info";
        case Level::kDebug: return "debug";
    }
    return "?";
}

void vwrite(Level level, const char* fmt, va_list args) {
    if (!enabled(level)) return;
    std::fprintf(stderr, "[rssbreath %s] ", tag(level));
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

}  // namespace

Level threshold() {
    static const Level cached = parse_env();
    return cached;
}

bool enabled(Level level) {
    return static_cast<int>(level) <= static_cast<int>(threshold());
}

#define RSSBREATH_LOG_BODY(level)   \
    va_list args;                   \
    va_start(args, fmt);            \
    vwrite((level), fmt, args);     \
    va_end(args)

void errorf(const char* fmt, ...) { RSSBREATH_LOG_BODY(Level::kError); }
void warnf(const char* fmt, ...) { RSSBREATH_LOG_BODY(Level::kWarn); }
void infof(const char* fmt, ...) { RSSBREATH_LOG_BODY(Level::kInfo); }
void debugf(const char* fmt, ...) { RSSBREATH_LOG_BODY(Level::kDebug); }

#undef RSSBREATH_LOG_BODY

}  // namespace rssbreath::log
