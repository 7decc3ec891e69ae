#include <cmath>
#include <string>

#include "conflens/metrics.hpp"

namespace conflens {

std::vector<std::uint8_t> encode_matrix_heatmap(const Matrix& matrix, double gamma,
                                                std::size_t block) {
  if (!(gamma > 0.0)) throw usage_error("gamma must be positive");
  if (block == 0) throw usage_error("block factor must be positive");
  const std::size_t n = matrix.size();
  if (n == 0) throw usage_error("cannot render an empty matrix");

  std::vector<std::uint8_t> levels(n * n);
  for (std::size_t i = 0; i < n * n; ++i) {
    const double v = matrix.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw data_error("heatmap values must lie in [0, 1], got " + std::to_string(v));
    }
    levels[i] = static_cast<std::uint8_t>(std::floor(255.0 * std::pow(v, gamma) + 0.5));
  }

  const std::size_t side = n * block;
  const std::string header = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + side * side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) out.push_back(levels[(y / block) * n + x / block]);
  }
  return out;
}

void render_matrix_heatmap(const Matrix& matrix, const std::filesystem::path& path, double gamma,
                           std::size_t block) {
  const auto bytes = encode_matrix_heatmap(matrix, gamma, block);
  write_file_bytes(path, bytes);
}

}  // namespace conflens
