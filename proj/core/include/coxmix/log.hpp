#pragma once

#include <string_view>

namespace coxmix::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level();

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }

// Raises the threshold to at least `level` for the lifetime of the object.
class ScopedLevel {
public:
    explicit ScopedLevel(Level level) : saved_(log::level()) {
        if (level > saved_) set_level(level);
    }
    ~ScopedLevel() { set_level(saved_); }
    ScopedLevel(const ScopedLevel&) = delete;
    ScopedLevel& operator=(const ScopedLevel&) = delete;

private:
    Level saved_;
};

}  // namespace coxmix::log
