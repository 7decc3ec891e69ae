#pragma once

// Synthetic segmentation data from a known confusion process: Voronoi
// ground truth, classifier hard labels drawn from the columns of a true
// confusion T, and soft outputs peaked at the hard label.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "conflens/confusion.hpp"
#include "conflens/manifest.hpp"
#include "conflens/rng.hpp"
#include "conflens/types.hpp"

namespace conflens {

struct SynthSpec {
  std::size_t n_classes = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t n_estimation = 200;
  std::size_t n_evaluation = 200;
  double region_scale = 16.0;  // expected region diameter, pixels
  Matrix true_confusion;       // (c, l) = P(C = c | l), column-stochastic
  double sharpness = 8.0;
  double border_noise = 0.0;   // corruption rate within one pixel of a border
  double confusion_jitter = 0.0;  // per-image relative jitter of each column's hit rate
  std::uint64_t seed = 0;
  std::size_t subset_min = 0;  // per-image class-subset size range; 0 = n_classes
  std::size_t subset_max = 0;

  void validate() const;
  std::size_t min_subset() const { return subset_min == 0 ? n_classes : subset_min; }
  std::size_t max_subset() const { return subset_max == 0 ? n_classes : subset_max; }

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

/// The desk-scale reference configuration: 8 classes, 64 x 64 images,
/// 200 + 200 images, subsets of 3-5 classes, structured off-diagonal
/// confusions (hit 0.7, swap 0.25) with per-image jitter 0.6.
SynthSpec reference_synth_spec();

/// Column-stochastic T with diagonal `hit`; each class l sends `swap` mass
/// to class (l + 1) mod n and spreads the rest evenly over the others.
Matrix structured_confusion(std::size_t n, double hit, double swap);

struct SynthImage {
  std::string id;
  Split split;
  std::vector<Label> classes;  // the image's class subset, ascending
  LabelMap gt;
  LabelMap hard;  // simulated classifier decisions (argmax of probs)
  ProbabilityMap probs;
};

std::string synth_image_id(Split split, std::size_t index);

/// The confusion image (split, index) is drawn from: T itself when
/// confusion_jitter is 0, else each column l has its diagonal scaled by
/// (1 + jitter * u), u ~ U(-1, 1), clipped to [0, 1], and its off-diagonal
/// entries rescaled to keep the column stochastic. Clipping at 1 makes the
/// mean hit rate slightly lower than T's when hit * (1 + jitter) > 1.
Matrix image_confusion(const SynthSpec& spec, Split split, std::size_t index);

/// Deterministic in (spec, split, index); independent of other images.
SynthImage generate_image(const SynthSpec& spec, Split split, std::size_t index);

/// A distribution over n labels peaked at `hard` whose argmax is `hard`.
std::vector<double> soft_output(Label hard, std::size_t n, double sharpness, Rng& rng);

/// Draws a classifier label for each ground-truth label from column l of T.
Label draw_hard_label(const Matrix& T, Label gt, Rng& rng);

/// Writes probs/<id>.segt, gt/<id>.segt, manifest.json, spec.json,
/// true_confusion.segt and classes.json under `out_dir`.
Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir,
                          std::size_t threads = 1);

/// T with the flooring of normalize_confusion applied.
ConfusionModel true_confusion(const SynthSpec& spec, double floor = kDefaultConfusionFloor);

}  // namespace conflens
