#pragma once

#include "mew/error.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace helpers {

/// Error code raised by fn, or nullopt when it returns normally.
inline std::optional<mew::Errc> error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const mew::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mew_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace helpers
