#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace fairproxy::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

inline std::atomic<Level>& level() {
  static std::atomic<Level> lvl{Level::warn};
  return lvl;
}

inline void set_level(Level l) { level().store(l); }

inline void warn(std::string_view msg) {
  if (level().load() >= Level::warn) std::clog << "[warn] " << msg << '\n';
}

inline void info(std::string_view msg) {
  if (level().load() >= Level::info) std::clog << "[info] " << msg << '\n';
}

}  // namespace fairproxy::log
