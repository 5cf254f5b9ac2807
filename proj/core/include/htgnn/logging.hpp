#pragma once

#include <string_view>

namespace htgnn {

// Reads HTGNN_LOG_LEVEL (trace, debug, info, warn, error, off). Default warn.
void configure_logging_from_env();
void set_log_level(std::string_view level);

}  // namespace htgnn
