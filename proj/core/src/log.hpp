#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace htgnn::detail {

spdlog::logger& logger();

}  // namespace htgnn::detail
