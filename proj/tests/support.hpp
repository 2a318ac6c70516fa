#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return MEDCORPUS_SOURCE_DIR; }
inline std::filesystem::path fixtures() { return source_dir() / "tests" / "fixtures"; }
inline std::filesystem::path registry() { return fixtures() / "registry"; }
inline std::filesystem::path cli_path() { return MEDCORPUS_CLI; }

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("medcorpus-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline medcorpus::json read_json(const std::filesystem::path& p) {
  return medcorpus::json::parse(medcorpus::read_text_file(p));
}

/// Largest number of sends inside any half-open window [t, t + window).
template <typename TimePoint, typename Duration>
std::size_t max_in_window(std::vector<TimePoint> sends, Duration window) {
  std::sort(sends.begin(), sends.end());
  std::size_t best = 0;
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < sends.size(); ++lo) {
    while (hi < sends.size() && sends[hi] < sends[lo] + window) ++hi;
    best = std::max(best, hi - lo);
  }
  return best;
}

}  // namespace testing
