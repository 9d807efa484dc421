#include "radialflow/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace radialflow {

namespace {

LogLevel parse_log_level() {
    const char* env = std::getenv("RADIALFLOW_LOG");
    if (env == nullptr) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Warn;
}

constexpr const char* level_tag(LogLevel level) {
    switch (level) {
        case LogLevel::Error: return "error";
        case LogLevel::Warn: return "warn";
        case LogLevel::Info: return "info";
        case LogLevel::Debug: return "debug";
    }
    return "?";
}

}  // namespace

LogLevel log_level() {
    static const LogLevel level = parse_log_level();
    return level;
}

void log_message(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::fprintf(stderr, "[radialflow:%s] %s\n", level_tag(level), msg.c_str());
}

}  // namespace radialflow
