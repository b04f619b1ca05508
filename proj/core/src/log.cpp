#include "spt/log.hpp"

#include <atomic>
#include <iostream>

namespace spt::log {
namespace {
std::atomic<Level> g_level{Level::kWarning};

void emit(Level at, std::string_view tag, std::string_view message) {
  if (at < g_level.load()) return;
  std::clog << "[spt " << tag << "] " << message << '\n';
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void info(std::string_view message) { emit(Level::kInfo, "info", message); }
void warning(std::string_view message) { emit(Level::kWarning, "warn", message); }

}  // namespace spt::log
