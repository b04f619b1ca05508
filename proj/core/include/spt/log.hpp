#pragma once

#include <string_view>

namespace spt::log {

enum class Level { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kSilent = 4 };

// Messages below this level are dropped. Defaults to kWarning.
void set_level(Level level);
Level level();

void info(std::string_view message);
void warning(std::string_view message);

}  // namespace spt::log
