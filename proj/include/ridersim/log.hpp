// Minimal leveled logging to stderr, controlled by the SIM_LOG_LEVEL
// environment variable (error | info | debug; default info).
#pragma once

#include <cstdarg>

namespace ridersim {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Reads SIM_LOG_LEVEL once; unknown values fall back to info.
LogLevel log_level();

void log_error(const char* fmt, ...);
void log_info(const char* fmt, ...);
void log_debug(const char* fmt, ...);

}  // namespace ridersim
