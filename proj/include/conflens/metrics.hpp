#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conflens/confusion.hpp"
#include "conflens/matrix.hpp"
#include "conflens/types.hpp"

namespace conflens {

/// Mergeable per-class tallies over scored (non-void, unmasked) pixels.
class EvalTally {
 public:
  explicit EvalTally(std::size_t num_labels);

  void add(const LabelMap& pred, const LabelMap& gt, const LabelSet& labels,
           const PixelMask* mask = nullptr);
  void merge(const EvalTally& other);

  std::uint64_t scored() const { return scored_; }
  std::uint64_t correct() const { return correct_; }

  double pixel_accuracy() const;
  /// Mean over classes with non-empty union, and the per-class values
  /// (nullopt where the union is empty).
  std::pair<double, std::vector<std::optional<double>>> mean_iou() const;

 private:
  std::uint64_t scored_ = 0;
  std::uint64_t correct_ = 0;
  std::vector<std::uint64_t> tp_, fp_, fn_;
};

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt, const LabelSet& labels);
std::pair<double, std::vector<std::optional<double>>> mean_iou(const LabelMap& pred,
                                                               const LabelMap& gt,
                                                               const LabelSet& labels);

struct EvalReport {
  double pixel_accuracy = 0.0;
  double mean_iou = 0.0;
  std::vector<std::optional<double>> per_class_iou;
  std::uint64_t n_pixels_scored = 0;

  static EvalReport from_tally(const EvalTally& tally);
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

/// Binary PGM (P5, maxval 255): each cell becomes a block x block square
/// with intensity round-half-up(255 * value^gamma).
std::vector<std::uint8_t> encode_matrix_heatmap(const Matrix& matrix, double gamma = 0.5,
                                                std::size_t block = 1);
void render_matrix_heatmap(const Matrix& matrix, const std::filesystem::path& path,
                           double gamma = 0.5, std::size_t block = 1);

}  // namespace conflens
