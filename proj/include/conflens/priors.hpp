#pragma once

// Label priors P(l): the image-independent uniform and global priors, the
// per-image binary and histogram priors, and the unconstrained prior solved
// by minimizing the clamped negative log-loss of the refined probabilities.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "conflens/confusion.hpp"
#include "conflens/manifest.hpp"
#include "conflens/types.hpp"

namespace conflens {

class Prior {
 public:
  /// Requires non-negative weights summing to one within 1e-9.
  explicit Prior(std::vector<double> weights);
  /// Rescales non-negative weights with positive mass onto the simplex.
  static Prior normalized(std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t l) const { return weights_[l]; }
  const std::vector<double>& weights() const { return weights_; }
  /// Labels with non-zero weight, ascending.
  std::vector<Label> support() const;

  friend bool operator==(const Prior&, const Prior&) = default;

 private:
  std::vector<double> weights_;
};

Prior uniform_prior(const LabelSet& labels);
Prior binary_prior(const LabelMap& gt, const LabelSet& labels);
Prior histogram_prior(const LabelMap& gt, const LabelSet& labels);
Prior global_prior(std::span<const LabelMap> gts, const LabelSet& labels);
Prior global_prior(const Manifest& manifest, Split split);

/// Non-void ground-truth pixel counts per class.
std::vector<std::uint64_t> label_histogram(const LabelMap& gt, const LabelSet& labels);

/// Annotated, classified sites feeding the log-loss: ground-truth label and
/// the classifier distribution X_i, stored row-major.
struct SampleSet {
  std::size_t num_labels = 0;
  std::vector<Label> truth;
  std::vector<double> probs;

  std::size_t size() const { return truth.size(); }
  bool empty() const { return truth.empty(); }
  std::span<const double> distribution(std::size_t i) const {
    return {probs.data() + i * num_labels, num_labels};
  }
  void add(Label gt, std::span<const float> x);
  void add(Label gt, std::span<const double> x);
};

/// Included, non-void sites of one image. When more than `max_samples`
/// qualify, a uniform subset of that size is kept (seeded, order-preserving).
SampleSet collect_samples(const ProbabilityMap& probs, const LabelMap& gt, const PixelMask& mask,
                          const LabelSet& labels, std::size_t max_samples, std::uint64_t seed);

inline constexpr double kLogLossEpsilon = 1e-10;

/// -sum_i log(max(P(l_i | d_i), eps)) with P from the refined distribution.
double refinement_loss(const Prior& prior, const ConfusionModel& confusion,
                       const SampleSet& samples);
/// Gradient of refinement_loss with respect to the prior weights, treated
/// as free coordinates (the marginal P(C = c) depends on them too).
std::vector<double> refinement_loss_gradient(const Prior& prior, const ConfusionModel& confusion,
                                             const SampleSet& samples);

// Raw-vector forms used by the solver and finite-difference checks; the
// weights need not lie on the simplex but must give positive marginals.
double refinement_loss(std::span<const double> weights, const Matrix& confusion,
                       const SampleSet& samples, double epsilon = kLogLossEpsilon);
double refinement_loss_with_gradient(std::span<const double> weights, const Matrix& confusion,
                                     const SampleSet& samples, std::vector<double>* gradient,
                                     double epsilon = kLogLossEpsilon);

enum class SolverInit { Uniform, Histogram };

struct SolverOptions {
  int max_iters = 500;
  double step_tolerance = 1e-9;
  double loss_tolerance = 1e-10;
  double epsilon = kLogLossEpsilon;
  SolverInit init = SolverInit::Histogram;

  void validate() const;
  nlohmann::json to_json() const;
  static SolverOptions from_json(const nlohmann::json& j);
};

struct SolverResult {
  Prior prior;
  double loss;
  double initial_loss;    // at the requested initialization
  double histogram_loss;  // at the sample-histogram prior
  double uniform_loss;
  int iterations;
  bool converged;
};

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

/// Projected gradient descent with backtracking over the simplex. Starts
/// from the better of the requested initialization and the uniform prior,
/// and never accepts a step that increases the loss.
SolverResult solve_unconstrained_prior(const ConfusionModel& confusion, const SampleSet& samples,
                                       const SolverOptions& opts = {});

Prior sample_histogram_prior(const SampleSet& samples);

enum class PriorKind { Uniform, Global, Binary, Histogram, Unconstrained };

std::string to_string(PriorKind kind);
PriorKind parse_prior_kind(const std::string& text);

/// Priors for the evaluation split, one row per image in manifest order
/// (shared kinds repeat the same row).
struct PriorBank {
  PriorKind kind = PriorKind::Uniform;
  std::vector<std::string> ids;
  std::vector<Prior> priors;
  std::optional<nlohmann::json> solver;

  const Prior& for_image(const std::string& id) const;
};

void save_prior_bank(const std::filesystem::path& path, const PriorBank& bank);
PriorBank load_prior_bank(const std::filesystem::path& path);

}  // namespace conflens
