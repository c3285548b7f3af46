#ifndef KCR_TESTS_TEST_UTIL_HPP
#define KCR_TESTS_TEST_UTIL_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>

#include "kcr/rng.hpp"
#include "kcr/tensor.hpp"

namespace kcr::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "kcr") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(s));
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace kcr::test

#endif  // KCR_TESTS_TEST_UTIL_HPP
