#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "volfied/core_model.hpp"

namespace volfied::testing {

inline Ad ad1d(std::uint32_t id, double x, double value,
               AdScope scope = AdScope::global()) {
  return Ad(AdId{id}, FeatureVector{x}, value, scope);
}

inline VehicleProfile vehicle1d(std::uint32_t id, double x) {
  return {VehicleId{id}, FeatureVector{x}};
}

inline FeatureVector uniform_point(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(n);
  for (auto& x : c) x = u(rng);
  return FeatureVector(std::move(c));
}

inline std::vector<Ad> random_ads(std::mt19937_64& rng, std::size_t count,
                                  int n) {
  std::uniform_real_distribution<double> value(0.01, 1.0);
  std::vector<Ad> ads;
  for (std::size_t i = 0; i < count; ++i) {
    ads.emplace_back(AdId{static_cast<std::uint32_t>(i + 1)},
                     uniform_point(rng, n), value(rng));
  }
  return ads;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("volfied_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name,
                              const std::string& content) const {
    auto p = path_ / name;
    std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace volfied::testing
