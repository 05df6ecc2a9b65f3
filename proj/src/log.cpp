#include "hprm/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace hprm::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mu;

const char* tag(Level l) {
  switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: break;
  }
  return "";
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level l, std::string_view message) {
  if (l < g_level.load()) return;
  std::lock_guard lock(g_mu);
  std::cerr << "[hprm " << tag(l) << "] " << message << '\n';
}

}  // namespace hprm::log
