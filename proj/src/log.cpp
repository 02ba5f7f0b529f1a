#include "dle/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace dle {

namespace {

LogLevel g_level = LogLevel::Warn;
std::once_flag g_init;
std::mutex g_mutex;

const char* level_name(LogLevel l) {
    switch (l) {
        case LogLevel::Error: return "error";
        case LogLevel::Warn: return "warn";
        case LogLevel::Info: return "info";
        case LogLevel::Debug: return "debug";
    }
    return "?";
}

void init_from_env() {
    const char* env = std::getenv("DLE_LOG_LEVEL");
    if (!env) return;
    if (std::strcmp(env, "error") == 0) g_level = LogLevel::Error;
    else if (std::strcmp(env, "warn") == 0) g_level = LogLevel::Warn;
    else if (std::strcmp(env, "info") == 0) g_level = LogLevel::Info;
    else if (std::strcmp(env, "debug") == 0) g_level = LogLevel::Debug;
}

}  // namespace

LogLevel log_level() {
    std::call_once(g_init, init_from_env);
    return g_level;
}

void set_log_level(LogLevel lvl) {
    std::call_once(g_init, init_from_env);
    g_level = lvl;
}

void logf(LogLevel lvl, const char* fmt, ...) {
    if (lvl > log_level()) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::fprintf(stderr, "[dle:%s] ", level_name(lvl));
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

}  // namespace dle
