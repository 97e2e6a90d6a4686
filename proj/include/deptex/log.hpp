#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace deptex::log {

enum class Level { Info, Warning, Error };

using Sink = std::function<void(Level, std::string_view)>;

/// Replaces the process-wide sink (stderr by default). Passing an empty
/// function restores the default.
void set_sink(Sink sink);

void write(Level level, std::string_view message);

inline void info(std::string_view m) { write(Level::Info, m); }
inline void warn(std::string_view m) { write(Level::Warning, m); }
inline void error(std::string_view m) { write(Level::Error, m); }

} // namespace deptex::log
