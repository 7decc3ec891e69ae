#pragma once

#include <cstddef>
#include <vector>

#include "conflens/types.hpp"

namespace conflens {

struct SiteDeviation {
  std::size_t site;
  double deviation;  // |sum - 1|
};

/// Every site whose channel sum deviates from one by more than `tol`.
std::vector<SiteDeviation> validate_probability_map(const ProbabilityMap& probs, double tol);

/// Drops channel `class_id` (e.g. a background output the label set does
/// not model) and renormalizes the remaining channels per pixel. Pixels
/// whose surviving mass is <= 1e-12 become uniform.
ProbabilityMap strip_class_and_renormalize(const ProbabilityMap& probs, std::size_t class_id);

}  // namespace conflens
