#include "coxmix/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace coxmix::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

const char* tag(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warning";
        case Level::error: return "error";
        default: return "";
    }
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level lvl, std::string_view message) {
    if (lvl < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "[coxmix " << tag(lvl) << "] " << message << '\n';
}

}  // namespace coxmix::log
