#pragma once

#include <string_view>

namespace dtsg::log {

enum class Level { kQuiet = 0, kWarn = 1, kInfo = 2 };

void set_level(Level level);
Level level();

void warn(std::string_view msg);
void info(std::string_view msg);

}  // namespace dtsg::log
