#pragma once

#include <set>
#include <vector>

#include "conflens/confusion.hpp"
#include "conflens/priors.hpp"
#include "conflens/types.hpp"

namespace conflens {

/// R(c1, c2) = P(c1 | C = c2), the linear map taking classifier output
/// distributions to refined label distributions, built once per
/// (confusion, prior) pair.
struct RefinementMatrix {
  Matrix matrix;
  std::vector<double> marginal;  // P(C = c)
};

/// P(C = c) = sum_l P(C = c | l) P(l).
std::vector<double> output_marginal(const ConfusionModel& confusion, const Prior& prior);

/// R(c1, c2) = P(C = c2 | c1) P(c1) / P(C = c2). An output c2 with zero
/// marginal (possible only with an unfloored confusion such as the exact
/// identity) carries the prior as its column.
RefinementMatrix build_refinement_matrix(const ConfusionModel& confusion, const Prior& prior);

/// X_hat = R X at every pixel, in double precision, pixel-major.
std::vector<double> refine_values(const RefinementMatrix& R, const ProbabilityMap& probs);

/// refine_values rounded into an f32 map.
ProbabilityMap refine_map(const RefinementMatrix& R, const ProbabilityMap& probs);

/// Lowest index wins ties.
LabelMap argmax_labels(const ProbabilityMap& probs);

/// Zeroes channels outside `present` and renormalizes; pixels with no
/// surviving mass become uniform over `present`.
ProbabilityMap labelbank_mask(const ProbabilityMap& probs, const std::set<Label>& present);

}  // namespace conflens
