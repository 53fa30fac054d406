#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "toponet/toponet.hpp"

namespace toponet::test {

inline RealGrid row(std::initializer_list<double> v) { return RealGrid(1, v.size(), std::vector<double>(v)); }

inline LabelMask mask_row(std::size_t categories, std::initializer_list<int> v) {
  std::vector<std::uint8_t> labels;
  for (int x : v) labels.push_back(static_cast<std::uint8_t>(x));
  const std::size_t n = labels.size();
  return LabelMask(categories, 1, n, std::move(labels));
}

inline LikelihoodMap map_of(const RealGrid& g) { return LikelihoodMap(1, g.height(), g.width(), g.values()); }

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("toponet_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace toponet::test
