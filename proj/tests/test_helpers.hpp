#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "conflens/confusion.hpp"
#include "conflens/priors.hpp"
#include "conflens/types.hpp"

namespace conflens::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("conflens_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& gen, double min_weight = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) {
    v = e(gen) + min_weight;
    s += v;
  }
  for (auto& v : w) v /= s;
  return w;
}

/// Random column-stochastic matrix with every entry >= min_entry before
/// normalization.
inline Matrix random_confusion(std::size_t n, std::mt19937_64& gen, double min_entry = 0.01) {
  Matrix m(n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto col = random_simplex(n, gen, min_entry);
    for (std::size_t c = 0; c < n; ++c) m(c, l) = col[c];
  }
  return m;
}

inline ProbabilityMap random_map(std::size_t h, std::size_t w, std::size_t n, std::mt19937_64& gen) {
  std::vector<float> values;
  values.reserve(h * w * n);
  for (std::size_t s = 0; s < h * w; ++s) {
    const auto p = random_simplex(n, gen);
    for (double v : p) values.push_back(static_cast<float>(v));
  }
  return ProbabilityMap(h, w, n, std::move(values));
}

inline LabelMap random_labels(std::size_t h, std::size_t w, std::size_t n, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(n) - 1);
  std::vector<Label> v(h * w);
  for (auto& x : v) x = static_cast<Label>(d(gen));
  return LabelMap(h, w, std::move(v));
}

inline LabelMap constant_labels(std::size_t h, std::size_t w, Label l) {
  return LabelMap(h, w, std::vector<Label>(h * w, l));
}

}  // namespace conflens::testing
