#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conflens/tensor_io.hpp"

namespace conflens {

using Label = std::uint16_t;

/// The label alphabet L, with an optional ignore label outside [0, size).
class LabelSet {
 public:
  explicit LabelSet(std::size_t size, std::vector<std::string> names = {},
                    std::optional<Label> void_id = std::nullopt);

  std::size_t size() const { return size_; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<Label> void_id() const { return void_id_; }

  bool is_void(Label l) const { return void_id_ && *void_id_ == l; }
  bool is_class(Label l) const { return l < size_; }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::size_t size_;
  std::vector<std::string> names_;
  std::optional<Label> void_id_;
};

/// Per-pixel distributions over labels, stored height x width x channels
/// with the channel index fastest.
class ProbabilityMap {
 public:
  ProbabilityMap(std::size_t height, std::size_t width, std::size_t channels,
                 std::vector<float> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixel_count() const { return height_ * width_; }

  std::span<const float> pixel(std::size_t site) const {
    return {values_.data() + site * channels_, channels_};
  }
  const std::vector<float>& values() const { return values_; }

  Tensor to_tensor() const;
  /// Parses a 3-D f32 tensor and rejects maps whose per-site sums deviate
  /// from one by more than `tol`.
  static ProbabilityMap from_tensor(const Tensor& tensor, double tol = 1e-4);

  friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> values_;
};

class LabelMap {
 public:
  LabelMap(std::size_t height, std::size_t width, std::vector<Label> labels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return height_ * width_; }

  Label operator[](std::size_t site) const { return labels_[site]; }
  Label at(std::size_t row, std::size_t col) const { return labels_[row * width_ + col]; }
  const std::vector<Label>& labels() const { return labels_; }

  /// Throws a data error if any entry is neither a class nor the void label.
  void validate(const LabelSet& labels) const;

  Tensor to_tensor() const;
  static LabelMap from_tensor(const Tensor& tensor);

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<Label> labels_;
};

}  // namespace conflens
