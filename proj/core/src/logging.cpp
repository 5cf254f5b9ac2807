#include "htgnn/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

#include "htgnn/errors.hpp"
#include "log.hpp"

namespace htgnn {

namespace detail {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("htgnn");
    l->set_level(spdlog::level::warn);
    l->set_pattern("[%H:%M:%S] [%l] %v");
    return l;
  }();
  return *instance;
}

}  // namespace detail

void set_log_level(std::string_view level) {
  const auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off") {
    throw ConfigError(fmt::format("unknown log level '{}'", level));
  }
  detail::logger().set_level(parsed);
}

void configure_logging_from_env() {
  if (const char* level = std::getenv("HTGNN_LOG_LEVEL"); level && *level) {
    set_log_level(level);
  }
}

}  // namespace htgnn
