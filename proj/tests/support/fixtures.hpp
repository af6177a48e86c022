#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "embellish/cli/app.hpp"

#ifndef EMBELLISH_TEST_DATA
#error "EMBELLISH_TEST_DATA must point at tests/data"
#endif
#ifndef EMBELLISH_REPO_DATA
#error "EMBELLISH_REPO_DATA must point at data/"
#endif

namespace embellish::testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(EMBELLISH_TEST_DATA) / name; }

inline std::filesystem::path repo_data_path(const std::string& name) {
  return std::filesystem::path(EMBELLISH_REPO_DATA) / name;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("embellish-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "embellish");
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace embellish::testing
