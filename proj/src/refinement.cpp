#include "conflens/refinement.hpp"

#include <algorithm>

namespace conflens {

std::vector<double> output_marginal(const ConfusionModel& confusion, const Prior& prior) {
  const std::size_t n = confusion.size();
  if (prior.size() != n) throw usage_error("prior and confusion disagree on the label count");
  const Matrix& T = confusion.matrix();
  std::vector<double> m(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t l = 0; l < n; ++l) m[c] += T(c, l) * prior[l];
  }
  return m;
}

RefinementMatrix build_refinement_matrix(const ConfusionModel& confusion, const Prior& prior) {
  const std::size_t n = confusion.size();
  RefinementMatrix out{Matrix(n), output_marginal(confusion, prior)};
  const Matrix& T = confusion.matrix();
  for (std::size_t c2 = 0; c2 < n; ++c2) {
    const double m = out.marginal[c2];
    for (std::size_t c1 = 0; c1 < n; ++c1) {
      out.matrix(c1, c2) = m > 0.0 ? T(c2, c1) * prior[c1] / m : prior[c1];
    }
  }
  return out;
}

std::vector<double> refine_values(const RefinementMatrix& R, const ProbabilityMap& probs) {
  const std::size_t n = R.matrix.size();
  if (probs.channels() != n) {
    throw usage_error("refinement matrix is " + std::to_string(n) + " x " + std::to_string(n) +
                      " but the map has " + std::to_string(probs.channels()) + " channels");
  }
  std::vector<double> values(probs.values().size());
  for (std::size_t site = 0; site < probs.pixel_count(); ++site) {
    const auto x = probs.pixel(site);
    double* out = values.data() + site * n;
    for (std::size_t l = 0; l < n; ++l) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += R.matrix(l, c) * x[c];
      out[l] = acc;
    }
  }
  return values;
}

ProbabilityMap refine_map(const RefinementMatrix& R, const ProbabilityMap& probs) {
  const auto refined = refine_values(R, probs);
  std::vector<float> values(refined.size());
  std::transform(refined.begin(), refined.end(), values.begin(),
                 [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
  return ProbabilityMap(probs.height(), probs.width(), probs.channels(), std::move(values));
}

LabelMap argmax_labels(const ProbabilityMap& probs) {
  std::vector<Label> labels(probs.pixel_count());
  for (std::size_t site = 0; site < probs.pixel_count(); ++site) {
    const auto x = probs.pixel(site);
    labels[site] = static_cast<Label>(std::max_element(x.begin(), x.end()) - x.begin());
  }
  return LabelMap(probs.height(), probs.width(), std::move(labels));
}

ProbabilityMap labelbank_mask(const ProbabilityMap& probs, const std::set<Label>& present) {
  if (present.empty()) throw usage_error("labelbank mask needs at least one present label");
  const std::size_t n = probs.channels();
  if (*present.rbegin() >= n) throw usage_error("present label outside the channel range");
  std::vector<float> values(probs.values().size(), 0.0f);
  for (std::size_t site = 0; site < probs.pixel_count(); ++site) {
    const auto x = probs.pixel(site);
    float* out = values.data() + site * n;
    double mass = 0.0;
    for (Label l : present) mass += x[l];
    for (Label l : present) {
      out[l] = mass > 0.0 ? static_cast<float>(x[l] / mass)
                          : static_cast<float>(1.0 / static_cast<double>(present.size()));
    }
  }
  return ProbabilityMap(probs.height(), probs.width(), n, std::move(values));
}

}  // namespace conflens
