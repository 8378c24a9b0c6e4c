#include "dtsg/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace dtsg::log {
namespace {

std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void warn(std::string_view msg) {
  if (g_level.load() < Level::kWarn) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[warn] " << msg << '\n';
}

void info(std::string_view msg) {
  if (g_level.load() < Level::kInfo) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[info] " << msg << '\n';
}

}  // namespace dtsg::log
