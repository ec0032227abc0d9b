#include "gzsl_align/logging.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "gzsl_align/errors.hpp"

namespace gzsl {

void init_logging(const std::string& fallback) {
  const char* env = std::getenv("GZSL_ALIGN_LOG");
  const std::string name = env && *env ? env : fallback;
  const auto level = spdlog::level::from_str(name);
  // from_str maps unknown names to off; only accept "off" when spelled out.
  if (level == spdlog::level::off && name != "off") {
    throw ConfigError("GZSL_ALIGN_LOG: unknown log level '" + name + "'");
  }
  static const auto logger = [] {
    auto l = spdlog::stderr_logger_mt("gzsl_align");
    l->set_pattern("[%l] %v");
    return l;
  }();
  logger->set_level(level);
  spdlog::set_default_logger(logger);
}

}  // namespace gzsl
