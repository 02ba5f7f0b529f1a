#pragma once

#include <cstdarg>

namespace dle {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from DLE_LOG_LEVEL (error|warn|info|debug), default warn.
LogLevel log_level();
void set_log_level(LogLevel lvl);

void logf(LogLevel lvl, const char* fmt, ...)
#if defined(__GNUC__)
    __attribute__((format(printf, 2, 3)))
#endif
    ;

}  // namespace dle
