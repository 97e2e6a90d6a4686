#include "deptex/log.hpp"

#include <iostream>
#include <mutex>

namespace deptex::log {

namespace {

std::mutex g_mutex;
Sink g_sink;

std::string_view label(Level level)
{
    switch (level) {
    case Level::Info: return "info";
    case Level::Warning: return "warning";
    case Level::Error: return "error";
    }
    return "log";
}

} // namespace

void set_sink(Sink sink)
{
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void write(Level level, std::string_view message)
{
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(level, message);
        return;
    }
    std::cerr << "deptex " << label(level) << ": " << message << '\n';
}

} // namespace deptex::log
