#pragma once

// Site-independent confusion statistics P(C = c | l): counts of
// (classifier argmax, ground truth) pairs gathered away from ground-truth
// region borders, floored and column-normalized.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "conflens/matrix.hpp"
#include "conflens/types.hpp"

namespace conflens {

inline constexpr double kDefaultConfusionFloor = 1e-4;
inline constexpr int kDefaultBorderRadius = 2;

class PixelMask {
 public:
  PixelMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> included);
  static PixelMask full(std::size_t height, std::size_t width);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool included(std::size_t site) const { return included_[site] != 0; }
  std::size_t included_count() const;
  const std::vector<std::uint8_t>& values() const { return included_; }

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> included_;
};

/// Pixels having an 8-neighbour with a different ground-truth label (void
/// counts as its own label).
std::vector<std::uint8_t> border_pixels(const LabelMap& gt);

/// Excludes every pixel within Chebyshev distance `radius` of a border pixel.
PixelMask border_mask(const LabelMap& gt, int radius);

/// counts(c, l): included non-void sites with ground truth l that the
/// classifier labelled c.
using CountMatrix = SquareMatrix<std::uint64_t>;

CountMatrix accumulate_counts(const LabelMap& gt, const LabelMap& pred, const PixelMask& mask,
                              const LabelSet& labels);
CountMatrix merge_counts(const CountMatrix& a, const CountMatrix& b);
std::uint64_t total_count(const CountMatrix& counts);

class ConfusionModel {
 public:
  /// Column-stochastic matrix(c, l) = P(C = c | l).
  const Matrix& matrix() const { return matrix_; }
  std::size_t size() const { return matrix_.size(); }
  double floor() const { return floor_; }
  const std::optional<CountMatrix>& source_counts() const { return counts_; }

  /// The exact identity: a classifier that never errs. Entries are not
  /// floored, so some output marginals can vanish under sparse priors.
  static ConfusionModel identity(std::size_t n);

  /// Adopts an externally supplied matrix; columns must be non-negative and
  /// sum to one within `tol`, and are renormalized exactly.
  static ConfusionModel from_matrix(const Matrix& m, double floor, double tol = 1e-4);

  friend ConfusionModel normalize_confusion(const CountMatrix& counts, double floor);

 private:
  ConfusionModel(Matrix m, double floor, std::optional<CountMatrix> counts)
      : matrix_(std::move(m)), floor_(floor), counts_(std::move(counts)) {}

  Matrix matrix_;
  double floor_ = kDefaultConfusionFloor;
  std::optional<CountMatrix> counts_;
};

/// Zero cells are replaced by `floor` before each column is L1-normalized.
ConfusionModel normalize_confusion(const CountMatrix& counts, double floor = kDefaultConfusionFloor);

/// Applies the same flooring rule to a probability matrix (columns are
/// treated as fractional counts).
ConfusionModel floor_probability_matrix(const Matrix& m, double floor = kDefaultConfusionFloor);

struct ConfusionProvenance {
  double floor = kDefaultConfusionFloor;
  int radius = kDefaultBorderRadius;
  std::uint64_t n_images = 0;
  std::uint64_t n_pixels = 0;
};

/// Sidecar path for a confusion or prior tensor: "<path>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

void save_confusion(const std::filesystem::path& path, const ConfusionModel& model,
                    const ConfusionProvenance& provenance);
ConfusionModel load_confusion(const std::filesystem::path& path);
ConfusionProvenance load_confusion_provenance(const std::filesystem::path& path);

Tensor matrix_to_tensor(const Matrix& m);
Matrix tensor_to_matrix(const Tensor& t);

}  // namespace conflens
