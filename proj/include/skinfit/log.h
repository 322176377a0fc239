// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_LOG_H
#define SKINFIT_LOG_H

#include <string_view>

namespace skinfit {

enum class LogLevel { Quiet = 0, Warning = 1, Info = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace skinfit

#endif  // SKINFIT_LOG_H
