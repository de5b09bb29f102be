#pragma once

#include <filesystem>
#include <string>

#include "roadwork/network.hpp"

#ifndef ROADWORK_DATA_DIR
#error "ROADWORK_DATA_DIR must be defined"
#endif

namespace roadwork::testing {

inline std::string data_path(const std::string& name) { return std::string(ROADWORK_DATA_DIR) + "/" + name; }

inline const TntpData& sioux_falls() {
  static const TntpData data = load_tntp_files(data_path("SiouxFalls_net.tntp"), data_path("SiouxFalls_trips.tntp"));
  return data;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("roadwork_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace roadwork::testing
