#pragma once

// Internal helpers shared by the experiment drivers (not installed).

#include <chrono>
#include <cstdint>
#include <string>

#include "covsde_tools/writers.hpp"

namespace covsde_tools::detail {

inline void put(ConfigList& config, const std::string& key, const std::string& value) {
  config.emplace_back(key, value);
}
inline void put(ConfigList& config, const std::string& key, const char* value) {
  config.emplace_back(key, std::string(value));
}
inline void put(ConfigList& config, const std::string& key, double value) {
  config.emplace_back(key, fmt_double(value));
}
inline void put(ConfigList& config, const std::string& key, int value) {
  config.emplace_back(key, std::to_string(value));
}
inline void put(ConfigList& config, const std::string& key, long long value) {
  config.emplace_back(key, std::to_string(value));
}
inline void put(ConfigList& config, const std::string& key, std::uint64_t value) {
  config.emplace_back(key, std::to_string(value));
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace covsde_tools::detail
