#include "conflens/priors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conflens/rng.hpp"

namespace conflens {

namespace {

void check_prior(const std::vector<double>& w) {
  if (w.size() < 2) throw usage_error("prior needs at least 2 entries");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw data_error("prior weights must be finite and >= 0");
    sum += v;
  }
  if (!(std::abs(sum - 1.0) <= 1e-9)) {
    throw data_error("prior weights sum to " + std::to_string(sum) + ", not 1");
  }
}

Prior from_counts(const std::vector<std::uint64_t>& counts) {
  const auto total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw data_error("no non-void ground-truth pixels");
  std::vector<double> w(counts.size());
  for (std::size_t l = 0; l < counts.size(); ++l) {
    w[l] = static_cast<double>(counts[l]) / static_cast<double>(total);
  }
  return Prior::normalized(std::move(w));
}

}  // namespace

Prior::Prior(std::vector<double> weights) : weights_(std::move(weights)) { check_prior(weights_); }

Prior Prior::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw data_error("prior weights must be finite and >= 0");
    sum += v;
  }
  if (!(sum > 0.0)) throw data_error("prior weights have no mass");
  for (double& v : weights) v /= sum;
  return Prior(std::move(weights));
}

std::vector<Label> Prior::support() const {
  std::vector<Label> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] > 0.0) out.push_back(static_cast<Label>(l));
  }
  return out;
}

Prior uniform_prior(const LabelSet& labels) {
  return Prior(std::vector<double>(labels.size(), 1.0 / static_cast<double>(labels.size())));
}

std::vector<std::uint64_t> label_histogram(const LabelMap& gt, const LabelSet& labels) {
  std::vector<std::uint64_t> counts(labels.size(), 0);
  for (Label l : gt.labels()) {
    if (labels.is_void(l)) continue;
    if (l >= labels.size()) throw data_error("ground-truth label " + std::to_string(l) + " is not a class");
    ++counts[l];
  }
  return counts;
}

Prior binary_prior(const LabelMap& gt, const LabelSet& labels) {
  auto counts = label_histogram(gt, labels);
  for (auto& c : counts) c = c > 0 ? 1 : 0;
  return from_counts(counts);
}

Prior histogram_prior(const LabelMap& gt, const LabelSet& labels) {
  return from_counts(label_histogram(gt, labels));
}

Prior global_prior(std::span<const LabelMap> gts, const LabelSet& labels) {
  if (gts.empty()) throw data_error("global prior needs at least one image");
  std::vector<std::uint64_t> counts(labels.size(), 0);
  for (const auto& gt : gts) {
    const auto h = label_histogram(gt, labels);
    for (std::size_t l = 0; l < counts.size(); ++l) counts[l] += h[l];
  }
  return from_counts(counts);
}

Prior global_prior(const Manifest& manifest, Split split) {
  const auto records = manifest.split(split);
  if (records.empty()) throw data_error("no " + to_string(split) + " records");
  std::vector<LabelMap> gts;
  gts.reserve(records.size());
  for (const auto* r : records) gts.push_back(load_ground_truth(manifest, *r));
  return global_prior(gts, manifest.labels);
}

void SampleSet::add(Label gt, std::span<const float> x) {
  if (x.size() != num_labels) throw usage_error("sample distribution has the wrong length");
  truth.push_back(gt);
  probs.insert(probs.end(), x.begin(), x.end());
}

void SampleSet::add(Label gt, std::span<const double> x) {
  if (x.size() != num_labels) throw usage_error("sample distribution has the wrong length");
  truth.push_back(gt);
  probs.insert(probs.end(), x.begin(), x.end());
}

SampleSet collect_samples(const ProbabilityMap& probs, const LabelMap& gt, const PixelMask& mask,
                          const LabelSet& labels, std::size_t max_samples, std::uint64_t seed) {
  if (probs.height() != gt.height() || probs.width() != gt.width() ||
      mask.height() != gt.height() || mask.width() != gt.width()) {
    throw usage_error("samples: map, ground truth and mask dimensions differ");
  }
  if (probs.channels() != labels.size()) throw usage_error("samples: channel count mismatch");
  std::vector<std::size_t> sites;
  for (std::size_t s = 0; s < gt.pixel_count(); ++s) {
    if (mask.included(s) && !labels.is_void(gt[s])) sites.push_back(s);
  }
  if (max_samples > 0 && sites.size() > max_samples) {
    // Partial Fisher-Yates, then restore raster order.
    Rng rng(seed);
    for (std::size_t i = 0; i < max_samples; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(sites.size() - i));
      std::swap(sites[i], sites[j]);
    }
    sites.resize(max_samples);
    std::sort(sites.begin(), sites.end());
  }
  SampleSet out;
  out.num_labels = labels.size();
  out.truth.reserve(sites.size());
  out.probs.reserve(sites.size() * labels.size());
  for (auto s : sites) {
    if (gt[s] >= labels.size()) throw data_error("ground-truth label is not a class");
    out.add(gt[s], probs.pixel(s));
  }
  return out;
}

double refinement_loss_with_gradient(std::span<const double> weights, const Matrix& confusion,
                                     const SampleSet& samples, std::vector<double>* gradient,
                                     double epsilon) {
  const std::size_t n = confusion.size();
  if (samples.empty()) throw usage_error("refinement loss needs at least one sample");
  if (weights.size() != n || samples.num_labels != n) {
    throw usage_error("prior, confusion and samples disagree on the label count");
  }

  // marginal(c) = sum_l P(C=c | l) P(l)
  std::vector<double> marginal(n, 0.0), inv_marginal(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t l = 0; l < n; ++l) marginal[c] += confusion(c, l) * weights[l];
    if (!(marginal[c] > 0.0)) {
      throw usage_error("refinement loss requires strictly positive output marginals");
    }
    inv_marginal[c] = 1.0 / marginal[c];
  }

  // P(g | d_i) = p(g) * sum_c T(c, g) X_i(c) / m(c). For the gradient,
  // dP/dp(k) = [k == g] S_i - p(g) sum_c T(c, g) X_i(c) T(c, k) / m(c)^2,
  // so the second term is collected per c and mixed through T once.
  std::vector<double> direct(n, 0.0), via_marginal(n, 0.0);
  double loss = 0.0;
  const double clamp_loss = -std::log(epsilon);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Label g = samples.truth[i];
    const auto x = samples.distribution(i);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += confusion(c, g) * x[c] * inv_marginal[c];
    const double p = weights[g] * s;
    if (p < epsilon) {
      loss += clamp_loss;
      continue;
    }
    loss -= std::log(p);
    if (gradient) {
      const double inv_p = 1.0 / p;
      direct[g] += s * inv_p;
      const double scale = weights[g] * inv_p;
      for (std::size_t c = 0; c < n; ++c) {
        via_marginal[c] += scale * confusion(c, g) * x[c] * inv_marginal[c] * inv_marginal[c];
      }
    }
  }
  if (gradient) {
    gradient->assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      double mixed = 0.0;
      for (std::size_t c = 0; c < n; ++c) mixed += via_marginal[c] * confusion(c, k);
      (*gradient)[k] = mixed - direct[k];
    }
  }
  return loss;
}

double refinement_loss(std::span<const double> weights, const Matrix& confusion,
                       const SampleSet& samples, double epsilon) {
  return refinement_loss_with_gradient(weights, confusion, samples, nullptr, epsilon);
}

double refinement_loss(const Prior& prior, const ConfusionModel& confusion,
                       const SampleSet& samples) {
  return refinement_loss(prior.weights(), confusion.matrix(), samples);
}

std::vector<double> refinement_loss_gradient(const Prior& prior, const ConfusionModel& confusion,
                                             const SampleSet& samples) {
  std::vector<double> g;
  refinement_loss_with_gradient(prior.weights(), confusion.matrix(), samples, &g);
  return g;
}

Prior sample_histogram_prior(const SampleSet& samples) {
  if (samples.empty()) throw usage_error("histogram of an empty sample set");
  std::vector<std::uint64_t> counts(samples.num_labels, 0);
  for (Label l : samples.truth) ++counts.at(l);
  return from_counts(counts);
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::Uniform: return "uniform";
    case PriorKind::Global: return "global";
    case PriorKind::Binary: return "binary";
    case PriorKind::Histogram: return "histogram";
    case PriorKind::Unconstrained: return "unconstrained";
  }
  return "?";
}

PriorKind parse_prior_kind(const std::string& text) {
  for (auto k : {PriorKind::Uniform, PriorKind::Global, PriorKind::Binary, PriorKind::Histogram,
                 PriorKind::Unconstrained}) {
    if (to_string(k) == text) return k;
  }
  throw usage_error("unknown prior kind '" + text + "'");
}

const Prior& PriorBank::for_image(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return priors[i];
  }
  throw data_error("prior bank has no entry for image '" + id + "'");
}

void save_prior_bank(const std::filesystem::path& path, const PriorBank& bank) {
  if (bank.ids.size() != bank.priors.size() || bank.priors.empty()) {
    throw usage_error("prior bank must have one prior per id");
  }
  const std::size_t n = bank.priors.front().size();
  std::vector<float> values;
  values.reserve(bank.priors.size() * n);
  for (const auto& p : bank.priors) {
    if (p.size() != n) throw usage_error("prior bank rows differ in length");
    for (double w : p.weights()) values.push_back(static_cast<float>(w));
  }
  store_tensor(path, Tensor::from_f32({static_cast<std::uint32_t>(bank.priors.size()),
                                       static_cast<std::uint32_t>(n)},
                                      std::move(values)));
  nlohmann::json meta{{"kind", to_string(bank.kind)}, {"ids", bank.ids}, {"solver", nullptr}};
  if (bank.solver) meta["solver"] = *bank.solver;
  write_text_file(sidecar_path(path), meta.dump(2) + "\n");
}

PriorBank load_prior_bank(const std::filesystem::path& path) {
  const auto t = load_tensor(path);
  if (t.dims.size() != 2) throw data_error(path.string() + ": prior bank must be 2-D");
  PriorBank bank;
  try {
    const auto meta = nlohmann::json::parse(read_text_file(sidecar_path(path)));
    bank.kind = parse_prior_kind(meta.at("kind").get<std::string>());
    bank.ids = meta.at("ids").get<std::vector<std::string>>();
    if (!meta.at("solver").is_null()) bank.solver = meta["solver"];
  } catch (const nlohmann::json::exception& e) {
    throw data_error(sidecar_path(path).string() + ": " + e.what());
  }
  if (bank.ids.size() != t.dims[0]) {
    throw data_error(path.string() + ": row count does not match the id list");
  }
  const auto& v = t.f32();
  const std::size_t n = t.dims[1];
  for (std::size_t r = 0; r < t.dims[0]; ++r) {
    std::vector<double> w(v.begin() + r * n, v.begin() + (r + 1) * n);
    double sum = 0.0;
    for (double x : w) sum += x;
    if (!(std::abs(sum - 1.0) <= 1e-4)) {
      throw data_error(path.string() + ": prior row " + std::to_string(r) + " does not sum to 1");
    }
    bank.priors.push_back(Prior::normalized(std::move(w)));
  }
  return bank;
}

}  // namespace conflens
