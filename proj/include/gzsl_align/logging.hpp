#pragma once

#include <string>

namespace gzsl {

/// Routes library logging to stderr at the level named by GZSL_ALIGN_LOG
/// (trace, debug, info, warn, error, critical, off), or `fallback` when the
/// variable is unset. Throws ConfigError on an unknown level name.
void init_logging(const std::string& fallback = "warn");

}  // namespace gzsl
