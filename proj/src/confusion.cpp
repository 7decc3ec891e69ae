#include "conflens/confusion.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace conflens {

PixelMask::PixelMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> included)
    : height_(height), width_(width), included_(std::move(included)) {
  if (included_.size() != height_ * width_) throw usage_error("mask payload does not match shape");
}

PixelMask PixelMask::full(std::size_t height, std::size_t width) {
  return PixelMask(height, width, std::vector<std::uint8_t>(height * width, 1));
}

std::size_t PixelMask::included_count() const {
  return static_cast<std::size_t>(std::count(included_.begin(), included_.end(), 1));
}

std::vector<std::uint8_t> border_pixels(const LabelMap& gt) {
  const auto h = static_cast<std::ptrdiff_t>(gt.height());
  const auto w = static_cast<std::ptrdiff_t>(gt.width());
  std::vector<std::uint8_t> border(gt.pixel_count(), 0);
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      const Label here = gt.at(r, c);
      bool differs = false;
      for (std::ptrdiff_t dr = -1; dr <= 1 && !differs; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          const auto rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          if (gt.at(rr, cc) != here) {
            differs = true;
            break;
          }
        }
      }
      border[r * w + c] = differs ? 1 : 0;
    }
  }
  return border;
}

namespace {

// 1-D running "any set within +-radius" along rows (stride 1) or columns.
void dilate_lines(std::vector<std::uint8_t>& img, std::size_t lines, std::size_t length,
                  std::size_t line_stride, std::size_t step, std::size_t radius) {
  std::vector<std::size_t> prefix(length + 1);
  for (std::size_t line = 0; line < lines; ++line) {
    const std::size_t base = line * line_stride;
    prefix[0] = 0;
    for (std::size_t i = 0; i < length; ++i) prefix[i + 1] = prefix[i] + img[base + i * step];
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t lo = i > radius ? i - radius : 0;
      const std::size_t hi = std::min(length, i + radius + 1);
      img[base + i * step] = prefix[hi] > prefix[lo] ? 1 : 0;
    }
  }
}

}  // namespace

PixelMask border_mask(const LabelMap& gt, int radius) {
  if (radius < 0) throw usage_error("border radius must be non-negative");
  auto excluded = border_pixels(gt);
  const std::size_t h = gt.height(), w = gt.width();
  const auto r = static_cast<std::size_t>(radius);
  if (r > 0) {
    // The Chebyshev ball is a square, so dilation separates into rows then columns.
    dilate_lines(excluded, h, w, w, 1, r);
    dilate_lines(excluded, w, h, 1, w, r);
  }
  for (auto& v : excluded) v = v ? 0 : 1;
  return PixelMask(h, w, std::move(excluded));
}

CountMatrix accumulate_counts(const LabelMap& gt, const LabelMap& pred, const PixelMask& mask,
                              const LabelSet& labels) {
  if (gt.height() != pred.height() || gt.width() != pred.width() ||
      gt.height() != mask.height() || gt.width() != mask.width()) {
    throw usage_error("ground truth, prediction and mask dimensions differ");
  }
  const std::size_t n = labels.size();
  CountMatrix counts(n);
  for (std::size_t site = 0; site < gt.pixel_count(); ++site) {
    const Label c = pred[site];
    if (c >= n) {
      throw data_error("prediction label " + std::to_string(c) + " at site " +
                       std::to_string(site) + " is not a class");
    }
    if (!mask.included(site)) continue;
    const Label l = gt[site];
    if (labels.is_void(l)) continue;
    if (l >= n) throw data_error("ground-truth label " + std::to_string(l) + " is not a class");
    ++counts(c, l);
  }
  return counts;
}

CountMatrix merge_counts(const CountMatrix& a, const CountMatrix& b) {
  if (a.size() != b.size()) throw usage_error("cannot merge count matrices of different sizes");
  CountMatrix out(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a.size(); ++c) out(r, c) = a(r, c) + b(r, c);
  }
  return out;
}

std::uint64_t total_count(const CountMatrix& counts) {
  std::uint64_t s = 0;
  for (auto v : counts.data()) s += v;
  return s;
}

ConfusionModel ConfusionModel::identity(std::size_t n) {
  return ConfusionModel(Matrix::identity(n), 0.0, std::nullopt);
}

ConfusionModel ConfusionModel::from_matrix(const Matrix& m, double floor, double tol) {
  const std::size_t n = m.size();
  if (n < 2) throw data_error("confusion matrix must be at least 2 x 2");
  Matrix out = m;
  for (std::size_t l = 0; l < n; ++l) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double v = m(c, l);
      if (!(v >= 0.0) || !std::isfinite(v)) throw data_error("confusion entries must be >= 0");
      sum += v;
    }
    if (!(std::abs(sum - 1.0) <= tol)) {
      throw data_error("confusion column " + std::to_string(l) + " sums to " + std::to_string(sum));
    }
    for (std::size_t c = 0; c < n; ++c) out(c, l) = m(c, l) / sum;
  }
  return ConfusionModel(std::move(out), floor, std::nullopt);
}

ConfusionModel normalize_confusion(const CountMatrix& counts, double floor) {
  if (!(floor > 0.0)) throw usage_error("confusion floor must be positive");
  const std::size_t n = counts.size();
  Matrix m(n);
  for (std::size_t l = 0; l < n; ++l) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const auto k = counts(c, l);
      m(c, l) = k == 0 ? floor : static_cast<double>(k);
      sum += m(c, l);
    }
    for (std::size_t c = 0; c < n; ++c) m(c, l) /= sum;
  }
  return ConfusionModel(std::move(m), floor, counts);
}

ConfusionModel floor_probability_matrix(const Matrix& m, double floor) {
  if (!(floor > 0.0)) throw usage_error("confusion floor must be positive");
  const std::size_t n = m.size();
  Matrix out(n);
  for (std::size_t l = 0; l < n; ++l) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (!(m(c, l) >= 0.0)) throw data_error("confusion entries must be >= 0");
      out(c, l) = m(c, l) == 0.0 ? floor : m(c, l);
      sum += out(c, l);
    }
    for (std::size_t c = 0; c < n; ++c) out(c, l) /= sum;
  }
  return ConfusionModel::from_matrix(out, floor, 1e-9);
}

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p += ".json";
  return p;
}

Tensor matrix_to_tensor(const Matrix& m) {
  std::vector<float> values(m.data().size());
  std::transform(m.data().begin(), m.data().end(), values.begin(),
                 [](double v) { return static_cast<float>(v); });
  const auto n = static_cast<std::uint32_t>(m.size());
  return Tensor::from_f32({n, n}, std::move(values));
}

Matrix tensor_to_matrix(const Tensor& t) {
  if (t.dims.size() != 2 || t.dims[0] != t.dims[1]) {
    throw data_error("expected a square 2-D tensor");
  }
  const auto& v = t.f32();
  return Matrix(t.dims[0], std::vector<double>(v.begin(), v.end()));
}

void save_confusion(const std::filesystem::path& path, const ConfusionModel& model,
                    const ConfusionProvenance& provenance) {
  store_tensor(path, matrix_to_tensor(model.matrix()));
  const nlohmann::json meta{{"floor", provenance.floor},
                            {"radius", provenance.radius},
                            {"n_images", provenance.n_images},
                            {"n_pixels", provenance.n_pixels}};
  write_text_file(sidecar_path(path), meta.dump(2) + "\n");
}

ConfusionProvenance load_confusion_provenance(const std::filesystem::path& path) {
  try {
    const auto meta = nlohmann::json::parse(read_text_file(sidecar_path(path)));
    return {meta.at("floor").get<double>(), meta.at("radius").get<int>(),
            meta.at("n_images").get<std::uint64_t>(), meta.at("n_pixels").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw data_error(sidecar_path(path).string() + ": " + e.what());
  }
}

ConfusionModel load_confusion(const std::filesystem::path& path) {
  const auto matrix = tensor_to_matrix(load_tensor(path));
  double floor = kDefaultConfusionFloor;
  if (std::filesystem::exists(sidecar_path(path))) floor = load_confusion_provenance(path).floor;
  return ConfusionModel::from_matrix(matrix, floor);
}

}  // namespace conflens
