#include "conflens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "conflens/parallel.hpp"

namespace conflens {

namespace {

enum Stream : std::uint64_t { kGeometry = 1, kClassifier = 2, kCorruption = 3, kJitter = 4 };

std::uint64_t split_key(Split s) { return s == Split::Estimation ? 0 : 1; }

}  // namespace

void SynthSpec::validate() const {
  if (n_classes < 2 || n_classes > 0xFFFF) throw usage_error("synth: n_classes must be in [2, 65535]");
  if (height == 0 || width == 0) throw usage_error("synth: image size must be positive");
  if (!(region_scale >= 1.0)) throw usage_error("synth: region_scale must be >= 1");
  if (!(sharpness > 0.0)) throw usage_error("synth: sharpness must be positive");
  if (!(border_noise >= 0.0 && border_noise <= 1.0)) throw usage_error("synth: border_noise must be in [0, 1]");
  if (!(confusion_jitter >= 0.0 && confusion_jitter <= 1.0)) throw usage_error("synth: confusion_jitter must be in [0, 1]");
  if (min_subset() < 1 || max_subset() > n_classes || min_subset() > max_subset()) {
    throw usage_error("synth: invalid class-subset size range");
  }
  if (true_confusion.size() != n_classes) throw usage_error("synth: true_confusion must be n_classes square");
  for (std::size_t l = 0; l < n_classes; ++l) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double v = true_confusion(c, l);
      if (!(v >= 0.0)) throw usage_error("synth: true_confusion entries must be >= 0");
      sum += v;
    }
    if (!(std::abs(sum - 1.0) <= 1e-9)) throw usage_error("synth: true_confusion columns must sum to 1");
  }
}

nlohmann::json SynthSpec::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> row(n_classes);
    for (std::size_t l = 0; l < n_classes; ++l) row[l] = true_confusion(c, l);
    rows.push_back(row);
  }
  return {{"n_classes", n_classes},       {"height", height},
          {"width", width},               {"n_estimation", n_estimation},
          {"n_evaluation", n_evaluation}, {"region_scale", region_scale},
          {"true_confusion", rows},       {"sharpness", sharpness},
          {"border_noise", border_noise}, {"confusion_jitter", confusion_jitter},
          {"seed", seed},
          {"subset_min", min_subset()},   {"subset_max", max_subset()}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.height = j.at("height").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.n_estimation = j.at("n_estimation").get<std::size_t>();
    s.n_evaluation = j.at("n_evaluation").get<std::size_t>();
    s.region_scale = j.at("region_scale").get<double>();
    s.sharpness = j.at("sharpness").get<double>();
    s.border_noise = j.value("border_noise", 0.0);
    s.confusion_jitter = j.value("confusion_jitter", 0.0);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.subset_min = j.value("subset_min", std::size_t{0});
    s.subset_max = j.value("subset_max", std::size_t{0});
    const auto& rows = j.at("true_confusion");
    if (rows.size() != s.n_classes) throw usage_error("synth: true_confusion must have n_classes rows");
    std::vector<double> flat;
    for (const auto& row : rows) {
      const auto r = row.get<std::vector<double>>();
      if (r.size() != s.n_classes) throw usage_error("synth: true_confusion rows must have n_classes entries");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    s.true_confusion = Matrix(s.n_classes, std::move(flat));
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

Matrix structured_confusion(std::size_t n, double hit, double swap) {
  if (n < 3) throw usage_error("structured confusion needs at least 3 classes");
  if (!(hit >= 0.0 && swap >= 0.0 && hit + swap <= 1.0)) {
    throw usage_error("structured confusion: hit + swap must lie in [0, 1]");
  }
  const double rest = (1.0 - hit - swap) / static_cast<double>(n - 2);
  Matrix T(n, rest);
  for (std::size_t l = 0; l < n; ++l) {
    T(l, l) = hit;
    T((l + 1) % n, l) = swap;
  }
  return T;
}

SynthSpec reference_synth_spec() {
  SynthSpec s;
  s.n_classes = 8;
  s.height = 64;
  s.width = 64;
  s.n_estimation = 200;
  s.n_evaluation = 200;
  s.region_scale = 20.0;
  s.true_confusion = structured_confusion(8, 0.7, 0.25);
  s.sharpness = 30.0;
  s.border_noise = 0.0;
  s.confusion_jitter = 0.6;
  s.seed = 20180101;
  s.subset_min = 3;
  s.subset_max = 5;
  return s;
}

std::string synth_image_id(Split split, std::size_t index) {
  std::string num = std::to_string(index);
  if (num.size() < 4) num.insert(0, 4 - num.size(), '0');
  return (split == Split::Estimation ? "est_" : "eval_") + num;
}

Matrix image_confusion(const SynthSpec& spec, Split split, std::size_t index) {
  Matrix T = spec.true_confusion;
  if (spec.confusion_jitter <= 0.0) return T;
  const std::size_t n = T.size();
  Rng rng(derive_seed(spec.seed, {split_key(split), index, kJitter}));
  for (std::size_t l = 0; l < n; ++l) {
    const double hit = T(l, l);
    const double u = 2.0 * rng.uniform() - 1.0;
    const double new_hit = std::clamp(hit * (1.0 + spec.confusion_jitter * u), 0.0, 1.0);
    const double scale = hit < 1.0 ? (1.0 - new_hit) / (1.0 - hit) : 0.0;
    for (std::size_t c = 0; c < n; ++c) T(c, l) = c == l ? new_hit : T(c, l) * scale;
    if (hit >= 1.0) T(l, l) = 1.0;
  }
  return T;
}

Label draw_hard_label(const Matrix& T, Label gt, Rng& rng) {
  const std::size_t n = T.size();
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const double p = T(c, gt);
    if (p <= 0.0) continue;
    acc += p;
    last = c;
    if (u < acc) return static_cast<Label>(c);
  }
  return static_cast<Label>(last);
}

std::vector<double> soft_output(Label hard, std::size_t n, double sharpness, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.exponential();
  w[hard] += sharpness;
  const auto top = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
  if (top != hard) std::swap(w[top], w[hard]);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= sum;
  return w;
}

namespace {

void write_soft(std::vector<float>& values, std::size_t site, const std::vector<double>& p) {
  // Round to f32, then fold the rounding residue into the peak so the
  // stored pixel still sums to one and keeps its argmax.
  const std::size_t n = p.size();
  float* out = values.data() + site * n;
  double sum = 0.0;
  std::size_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(p[i]);
    sum += out[i];
    if (p[i] > p[top]) top = i;
  }
  out[top] = static_cast<float>(static_cast<double>(out[top]) + (1.0 - sum));
}

}  // namespace

SynthImage generate_image(const SynthSpec& spec, Split split, std::size_t index) {
  const std::size_t n = spec.n_classes, h = spec.height, w = spec.width;
  const std::size_t sites = h * w;
  const std::uint64_t key = split_key(split);

  // Geometry: seeded Voronoi cells over the image, each assigned a class
  // from the image's class subset.
  Rng geo(derive_seed(spec.seed, {key, index, kGeometry}));
  const std::size_t lo = spec.min_subset(), hi = spec.max_subset();
  const std::size_t k = lo + static_cast<std::size_t>(geo.below(hi - lo + 1));
  std::vector<Label> pool(n);
  std::iota(pool.begin(), pool.end(), Label{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + static_cast<std::size_t>(geo.below(n - i))]);
  }
  std::vector<Label> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));

  const double area = spec.region_scale * spec.region_scale;
  const std::size_t n_cells = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(sites) / area)), std::max<std::size_t>(k, 1), sites);
  std::vector<std::size_t> centers;
  centers.reserve(n_cells);
  {
    std::vector<std::uint8_t> taken(sites, 0);
    while (centers.size() < n_cells) {
      const auto s = static_cast<std::size_t>(geo.below(sites));
      if (taken[s]) continue;
      taken[s] = 1;
      centers.push_back(s);
    }
  }
  // Every subset class owns at least one cell; the rest are drawn uniformly.
  std::vector<Label> cell_class(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    cell_class[c] = c < k ? subset[c] : subset[static_cast<std::size_t>(geo.below(k))];
  }
  std::sort(subset.begin(), subset.end());

  std::vector<Label> gt(sites);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n_cells; ++c) {
        const double dy = static_cast<double>(centers[c] / w) - static_cast<double>(r);
        const double dx = static_cast<double>(centers[c] % w) - static_cast<double>(col);
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      gt[r * w + col] = cell_class[best];
    }
  }
  LabelMap gt_map(h, w, std::move(gt));

  // Classifier: one hard draw and one soft output per pixel, raster order.
  const Matrix T = image_confusion(spec, split, index);
  Rng clf(derive_seed(spec.seed, {key, index, kClassifier}));
  std::vector<Label> hard(sites);
  std::vector<float> probs(sites * n);
  for (std::size_t s = 0; s < sites; ++s) {
    hard[s] = draw_hard_label(T, gt_map[s], clf);
    write_soft(probs, s, soft_output(hard[s], n, spec.sharpness, clf));
  }

  // Border corruption touches only pixels within one pixel of a border, on
  // its own stream, so all other pixels are identical to the clean draw.
  if (spec.border_noise > 0.0) {
    Rng noise(derive_seed(spec.seed, {key, index, kCorruption}));
    const auto ring = border_mask(gt_map, 1);
    for (std::size_t s = 0; s < sites; ++s) {
      if (ring.included(s)) continue;
      if (noise.uniform() >= spec.border_noise) continue;
      hard[s] = static_cast<Label>(noise.below(n));
      write_soft(probs, s, soft_output(hard[s], n, spec.sharpness, noise));
    }
  }

  return SynthImage{synth_image_id(split, index), split, std::move(subset), std::move(gt_map),
                    LabelMap(h, w, std::move(hard)), ProbabilityMap(h, w, n, std::move(probs))};
}

Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir,
                          std::size_t threads) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "probs", ec);
  if (!ec) fs::create_directories(out_dir / "gt", ec);
  if (ec) throw io_error("cannot create " + out_dir.string() + ": " + ec.message());

  struct Job {
    Split split;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < spec.n_estimation; ++i) jobs.push_back({Split::Estimation, i});
  for (std::size_t i = 0; i < spec.n_evaluation; ++i) jobs.push_back({Split::Evaluation, i});

  std::vector<std::vector<Label>> classes(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto img = generate_image(spec, jobs[j].split, jobs[j].index);
    store_tensor(out_dir / "probs" / (img.id + ".segt"), img.probs.to_tensor());
    store_tensor(out_dir / "gt" / (img.id + ".segt"), img.gt.to_tensor());
    classes[j] = img.classes;
  });

  Manifest manifest{LabelSet(spec.n_classes), {}, out_dir};
  nlohmann::json class_doc = nlohmann::json::object();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto id = synth_image_id(jobs[j].split, jobs[j].index);
    manifest.records.push_back(
        {id, fs::path("probs") / (id + ".segt"), fs::path("gt") / (id + ".segt"), jobs[j].split});
    class_doc[id] = classes[j];
  }
  save_manifest(out_dir / "manifest.json", manifest);
  write_text_file(out_dir / "spec.json", spec.to_json().dump(2) + "\n");
  write_text_file(out_dir / "classes.json", class_doc.dump(2) + "\n");
  store_tensor(out_dir / "true_confusion.segt", matrix_to_tensor(spec.true_confusion));
  return manifest;
}

ConfusionModel true_confusion(const SynthSpec& spec, double floor) {
  spec.validate();
  return floor_probability_matrix(spec.true_confusion, floor);
}

}  // namespace conflens
