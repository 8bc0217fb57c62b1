#pragma once

#include <ostream>
#include <string_view>

#include <json.hpp>

namespace forge::log {

enum class Level { debug, info, warn, error };

/// Line-delimited JSON logger; writes to the error stream only.
/// Both setters return the previous value.
std::ostream* set_stream(std::ostream* os);
Level set_min_level(Level level);
void emit(Level level, std::string_view event, const nlohmann::json& fields = nlohmann::json::object());

inline void info(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    emit(Level::info, event, fields);
}
inline void warn(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    emit(Level::warn, event, fields);
}
inline void error(std::string_view event, const nlohmann::json& fields = nlohmann::json::object()) {
    emit(Level::error, event, fields);
}

} // namespace forge::log
