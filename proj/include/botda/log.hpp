#pragma once

#include <functional>
#include <string>

namespace botda {

using LogSink = std::function<void(const std::string&)>;

/// Replace the warning sink (default: stderr). Returns the previous sink.
LogSink set_warning_sink(LogSink sink);
void log_warning(const std::string& message);

}  // namespace botda
