#include "forge/log.hpp"

#include <iostream>
#include <utility>
#include <mutex>

namespace forge::log {

namespace {
std::ostream* g_stream = &std::cerr;
Level g_min = Level::info;
std::mutex g_mutex;

const char* name(Level level) {
    switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    }
    return "info";
}
} // namespace

std::ostream* set_stream(std::ostream* os) {
    std::lock_guard lock(g_mutex);
    return std::exchange(g_stream, os);
}

Level set_min_level(Level level) {
    std::lock_guard lock(g_mutex);
    return std::exchange(g_min, level);
}

void emit(Level level, std::string_view event, const nlohmann::json& fields) {
    std::lock_guard lock(g_mutex);
    if (g_stream == nullptr || level < g_min) return;
    nlohmann::json line = {{"level", name(level)}, {"event", std::string(event)}};
    if (fields.is_object()) {
        for (auto it = fields.begin(); it != fields.end(); ++it) line[it.key()] = it.value();
    }
    *g_stream << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

} // namespace forge::log
