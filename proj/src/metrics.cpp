#include "conflens/metrics.hpp"

#include <json.hpp>

namespace conflens {

EvalTally::EvalTally(std::size_t num_labels)
    : tp_(num_labels, 0), fp_(num_labels, 0), fn_(num_labels, 0) {}

void EvalTally::add(const LabelMap& pred, const LabelMap& gt, const LabelSet& labels,
                    const PixelMask* mask) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw usage_error("prediction and ground-truth dimensions differ");
  }
  if (mask && (mask->height() != gt.height() || mask->width() != gt.width())) {
    throw usage_error("mask dimensions differ from the ground truth");
  }
  if (labels.size() != tp_.size()) throw usage_error("label set does not match the tally");
  const std::size_t n = tp_.size();
  for (std::size_t s = 0; s < gt.pixel_count(); ++s) {
    const Label g = gt[s];
    if (labels.is_void(g)) continue;
    if (mask && !mask->included(s)) continue;
    const Label p = pred[s];
    if (g >= n || p >= n) throw data_error("label outside the label set at site " + std::to_string(s));
    ++scored_;
    if (p == g) {
      ++correct_;
      ++tp_[g];
    } else {
      ++fp_[p];
      ++fn_[g];
    }
  }
}

void EvalTally::merge(const EvalTally& other) {
  if (other.tp_.size() != tp_.size()) throw usage_error("cannot merge tallies of different sizes");
  scored_ += other.scored_;
  correct_ += other.correct_;
  for (std::size_t l = 0; l < tp_.size(); ++l) {
    tp_[l] += other.tp_[l];
    fp_[l] += other.fp_[l];
    fn_[l] += other.fn_[l];
  }
}

double EvalTally::pixel_accuracy() const {
  if (scored_ == 0) throw data_error("no non-void pixels to score");
  return static_cast<double>(correct_) / static_cast<double>(scored_);
}

std::pair<double, std::vector<std::optional<double>>> EvalTally::mean_iou() const {
  std::vector<std::optional<double>> per_class(tp_.size());
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t l = 0; l < tp_.size(); ++l) {
    const auto uni = tp_[l] + fp_[l] + fn_[l];
    if (uni == 0) continue;
    per_class[l] = static_cast<double>(tp_[l]) / static_cast<double>(uni);
    sum += *per_class[l];
    ++present;
  }
  if (present == 0) throw data_error("every class has an empty union");
  return {sum / static_cast<double>(present), std::move(per_class)};
}

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt, const LabelSet& labels) {
  EvalTally t(labels.size());
  t.add(pred, gt, labels);
  return t.pixel_accuracy();
}

std::pair<double, std::vector<std::optional<double>>> mean_iou(const LabelMap& pred,
                                                               const LabelMap& gt,
                                                               const LabelSet& labels) {
  EvalTally t(labels.size());
  t.add(pred, gt, labels);
  return t.mean_iou();
}

EvalReport EvalReport::from_tally(const EvalTally& tally) {
  auto [miou, per_class] = tally.mean_iou();
  return {tally.pixel_accuracy(), miou, std::move(per_class), tally.scored()};
}

std::string EvalReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : per_class_iou) per.push_back(v ? nlohmann::json(*v) : nlohmann::json());
  return nlohmann::json{{"pixel_accuracy", pixel_accuracy},
                        {"mean_iou", mean_iou},
                        {"per_class_iou", per},
                        {"n_pixels_scored", n_pixels_scored}}
             .dump(2) +
         "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.pixel_accuracy = j.at("pixel_accuracy").get<double>();
    r.mean_iou = j.at("mean_iou").get<double>();
    for (const auto& v : j.at("per_class_iou")) {
      r.per_class_iou.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    r.n_pixels_scored = j.at("n_pixels_scored").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("bad evaluation report: ") + e.what());
  }
}

}  // namespace conflens
