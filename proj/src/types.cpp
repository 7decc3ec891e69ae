#include "conflens/types.hpp"

#include <cmath>
#include <limits>

#include "conflens/preprocess.hpp"

namespace conflens {

LabelSet::LabelSet(std::size_t size, std::vector<std::string> names, std::optional<Label> void_id)
    : size_(size), names_(std::move(names)), void_id_(void_id) {
  if (size_ < 2) throw usage_error("label set needs at least 2 labels");
  if (size_ > std::numeric_limits<Label>::max()) throw usage_error("label set too large");
  if (!names_.empty() && names_.size() != size_) {
    throw usage_error("label names count " + std::to_string(names_.size()) +
                      " does not match size " + std::to_string(size_));
  }
  if (void_id_ && *void_id_ < size_) {
    throw usage_error("void id " + std::to_string(*void_id_) + " collides with a class index");
  }
}

ProbabilityMap::ProbabilityMap(std::size_t height, std::size_t width, std::size_t channels,
                               std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0) throw usage_error("probability map must be non-empty");
  if (channels_ < 2) throw usage_error("probability map needs at least 2 channels");
  if (values_.size() != height_ * width_ * channels_) {
    throw usage_error("probability map payload does not match its shape");
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw data_error("probability value outside [0, 1]: " + std::to_string(v));
    }
  }
}

Tensor ProbabilityMap::to_tensor() const {
  return Tensor::from_f32({static_cast<std::uint32_t>(height_), static_cast<std::uint32_t>(width_),
                           static_cast<std::uint32_t>(channels_)},
                          values_);
}

ProbabilityMap ProbabilityMap::from_tensor(const Tensor& tensor, double tol) {
  if (tensor.dims.size() != 3) throw data_error("probability map tensor must be 3-D");
  ProbabilityMap map(tensor.dims[0], tensor.dims[1], tensor.dims[2], tensor.f32());
  const auto bad = validate_probability_map(map, tol);
  if (!bad.empty()) {
    throw data_error("probability map has " + std::to_string(bad.size()) +
                     " sites whose sum deviates from 1 (first: site " +
                     std::to_string(bad.front().site) + ", deviation " +
                     std::to_string(bad.front().deviation) + ")");
  }
  return map;
}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::vector<Label> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height_ == 0 || width_ == 0) throw usage_error("label map must be non-empty");
  if (labels_.size() != height_ * width_) {
    throw usage_error("label map payload does not match its shape");
  }
}

void LabelMap::validate(const LabelSet& set) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const Label l = labels_[i];
    if (!set.is_class(l) && !set.is_void(l)) {
      throw data_error("label " + std::to_string(l) + " at site " + std::to_string(i) +
                       " is outside the label set");
    }
  }
}

Tensor LabelMap::to_tensor() const {
  return Tensor::from_u16({static_cast<std::uint32_t>(height_), static_cast<std::uint32_t>(width_)},
                          labels_);
}

LabelMap LabelMap::from_tensor(const Tensor& tensor) {
  if (tensor.dims.size() != 2) throw data_error("label map tensor must be 2-D");
  return LabelMap(tensor.dims[0], tensor.dims[1], tensor.u16());
}

}  // namespace conflens
