// SPDX-License-Identifier: Apache-2.0

#include <skinfit/log.h>

#include <atomic>
#include <iostream>
#include <mutex>

namespace skinfit {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Warning};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_warning(std::string_view message) {
    if (g_level < LogLevel::Warning) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[warning] " << message << '\n';
}

void log_info(std::string_view message) {
    if (g_level < LogLevel::Info) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[info] " << message << '\n';
}

}  // namespace skinfit
