#include "conflens/preprocess.hpp"

#include <cmath>

namespace conflens {

namespace {
constexpr double kDegenerateMass = 1e-12;
}

std::vector<SiteDeviation> validate_probability_map(const ProbabilityMap& probs, double tol) {
  if (!(tol > 0.0)) throw usage_error("validation tolerance must be positive");
  std::vector<SiteDeviation> out;
  for (std::size_t site = 0; site < probs.pixel_count(); ++site) {
    double sum = 0.0;
    for (float v : probs.pixel(site)) sum += v;
    const double dev = std::abs(sum - 1.0);
    if (!(dev <= tol)) out.push_back({site, dev});
  }
  return out;
}

ProbabilityMap strip_class_and_renormalize(const ProbabilityMap& probs, std::size_t class_id) {
  const std::size_t k = probs.channels();
  if (k < 3) throw usage_error("stripping a class needs at least 3 channels");
  if (class_id >= k) {
    throw usage_error("class id " + std::to_string(class_id) + " out of range");
  }
  const std::size_t out_k = k - 1;
  std::vector<float> values(probs.pixel_count() * out_k);
  std::vector<double> kept(out_k);
  for (std::size_t site = 0; site < probs.pixel_count(); ++site) {
    const auto in = probs.pixel(site);
    double mass = 0.0;
    for (std::size_t c = 0, j = 0; c < k; ++c) {
      if (c == class_id) continue;
      kept[j] = in[c];
      mass += in[c];
      ++j;
    }
    float* out = values.data() + site * out_k;
    if (mass <= kDegenerateMass) {
      for (std::size_t j = 0; j < out_k; ++j) out[j] = static_cast<float>(1.0 / double(out_k));
    } else {
      for (std::size_t j = 0; j < out_k; ++j) out[j] = static_cast<float>(kept[j] / mass);
    }
  }
  return ProbabilityMap(probs.height(), probs.width(), out_k, std::move(values));
}

}  // namespace conflens
