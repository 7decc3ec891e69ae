#include <doctest.h>

#include <cstdlib>
#include <random>

#include "conflens/confusion.hpp"
#include "conflens/refinement.hpp"
#include "conflens/rng.hpp"
#include "conflens/synth.hpp"
#include "test_helpers.hpp"

using namespace conflens;
using conflens::testing::TempDir;

namespace {

// Oracle: explicit neighbour scan and Chebyshev-ball search, no separability.
std::vector<std::uint8_t> brute_force_included(const LabelMap& gt, int radius) {
  const int h = static_cast<int>(gt.height()), w = static_cast<int>(gt.width());
  auto is_border = [&](int r, int c) {
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr >= 0 && rr < h && cc >= 0 && cc < w && gt.at(rr, cc) != gt.at(r, c)) return true;
      }
    return false;
  };
  std::vector<std::uint8_t> inc(gt.pixel_count(), 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int rr = std::max(0, r - radius); rr <= std::min(h - 1, r + radius); ++rr)
        for (int cc = std::max(0, c - radius); cc <= std::min(w - 1, c + radius); ++cc)
          if (is_border(rr, cc)) inc[r * w + c] = 0;
  return inc;
}

LabelMap two_band_map() {
  // 5x5, columns 0-2 label 0, columns 3-4 label 1.
  std::vector<Label> v(25);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) v[r * 5 + c] = c < 3 ? 0 : 1;
  return LabelMap(5, 5, v);
}

std::size_t excluded_in_column(const PixelMask& m, std::size_t col) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < m.height(); ++r) n += m.included(r * m.width() + col) ? 0 : 1;
  return n;
}

}  // namespace

TEST_CASE("border_mask examples") {
  CHECK(border_mask(conflens::testing::constant_labels(5, 5, 3), 2).included_count() == 25);

  const auto gt = two_band_map();
  const auto r0 = border_mask(gt, 0);
  CHECK(r0.included_count() == 15);
  CHECK(excluded_in_column(r0, 2) == 5);
  CHECK(excluded_in_column(r0, 3) == 5);
  CHECK(r0.values() == brute_force_included(gt, 0));

  const auto r1 = border_mask(gt, 1);
  CHECK(r1.included_count() == 5);
  CHECK(excluded_in_column(r1, 0) == 0);
  for (int c = 1; c < 5; ++c) CHECK(excluded_in_column(r1, c) == 5);
  CHECK(r1.values() == brute_force_included(gt, 1));

  CHECK_THROWS_AS(border_mask(gt, -1), Error);
}

TEST_CASE("void is a distinct label for border detection") {
  const LabelMap gt(1, 4, {0, 0, 255, 255});
  const auto m = border_mask(gt, 0);
  CHECK(m.values() == std::vector<std::uint8_t>{1, 0, 0, 1});
}

TEST_CASE("property: border_mask matches brute force and is monotone in radius") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 60; ++trial) {
    // Blocky maps so that interiors exist.
    const std::size_t h = 6 + trial % 9, w = 5 + trial % 7;
    const auto coarse = conflens::testing::random_labels((h + 2) / 3, (w + 2) / 3, 3, gen);
    std::vector<Label> v(h * w);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) v[r * w + c] = coarse.at(r / 3, c / 3);
    const LabelMap gt(h, w, v);
    std::vector<std::uint8_t> prev;
    for (int radius = 0; radius <= 4; ++radius) {
      const auto m = border_mask(gt, radius);
      CHECK(m.values() == brute_force_included(gt, radius));
      if (!prev.empty()) {
        for (std::size_t s = 0; s < v.size(); ++s) {
          if (!prev[s]) CHECK_FALSE(m.included(s));
        }
      }
      prev = m.values();
    }
  }
}

TEST_CASE("accumulate_counts examples") {
  const LabelSet labels(2);
  const auto zeros = conflens::testing::constant_labels(4, 4, 0);
  const auto ones = conflens::testing::constant_labels(4, 4, 1);
  const auto full = PixelMask::full(4, 4);

  auto c = accumulate_counts(zeros, zeros, full, labels);
  CHECK(c(0, 0) == 16);
  CHECK(total_count(c) == 16);

  c = accumulate_counts(zeros, ones, full, labels);
  CHECK(c(1, 0) == 16);
  CHECK(total_count(c) == 16);

  std::vector<std::uint8_t> inc(16, 1);
  for (int i = 0; i < 6; ++i) inc[i * 2] = 0;
  c = accumulate_counts(zeros, ones, PixelMask(4, 4, inc), labels);
  CHECK(c(1, 0) == 10);

  CHECK_THROWS_AS(accumulate_counts(zeros, conflens::testing::constant_labels(4, 3, 0),
                                    full, labels),
                  Error);
}

TEST_CASE("accumulate_counts skips void ground truth and rejects void predictions") {
  const LabelSet labels(2, {}, Label{9});
  const LabelMap gt(1, 3, {0, 9, 1});
  const LabelMap pred(1, 3, {1, 1, 1});
  const auto c = accumulate_counts(gt, pred, PixelMask::full(1, 3), labels);
  CHECK(total_count(c) == 2);
  CHECK(c(1, 0) == 1);
  CHECK(c(1, 1) == 1);
  CHECK_THROWS_AS(accumulate_counts(gt, LabelMap(1, 3, {1, 9, 1}), PixelMask::full(1, 3), labels),
                  Error);
}

TEST_CASE("property: accumulate total equals included non-void pixels") {
  std::mt19937_64 gen(5);
  const LabelSet labels(4, {}, Label{4});
  for (int trial = 0; trial < 50; ++trial) {
    auto gt = conflens::testing::random_labels(7, 6, 5, gen);  // label 4 is void
    const auto pred = conflens::testing::random_labels(7, 6, 4, gen);
    const auto mask = border_mask(gt, trial % 2);
    std::uint64_t expected = 0;
    for (std::size_t s = 0; s < gt.pixel_count(); ++s) {
      if (mask.included(s) && gt[s] != 4) ++expected;
    }
    const auto c = accumulate_counts(gt, pred, mask, labels);
    CHECK(total_count(c) == expected);
    for (std::size_t l = 0; l < 4; ++l) {
      std::uint64_t col = 0;
      for (std::size_t s = 0; s < gt.pixel_count(); ++s) col += mask.included(s) && gt[s] == l;
      CHECK(c.column_sum(l) == col);
    }
  }
}

TEST_CASE("merge_counts is an associative, commutative monoid") {
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<std::uint64_t> d(0, 1000);
  auto random_counts = [&] {
    CountMatrix m(4);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) m(r, c) = d(gen);
    return m;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_counts(), b = random_counts(), c = random_counts();
    CHECK(merge_counts(a, CountMatrix(4)) == a);
    CHECK(merge_counts(a, b) == merge_counts(b, a));
    CHECK(merge_counts(merge_counts(a, b), c) == merge_counts(a, merge_counts(b, c)));
  }
  CHECK_THROWS_AS(merge_counts(CountMatrix(3), CountMatrix(4)), Error);
}

TEST_CASE("normalize_confusion examples") {
  SUBCASE("column [10, 0]") {
    CountMatrix c(2);
    c(0, 0) = 10;
    c(1, 1) = 5;
    const auto m = normalize_confusion(c, 1e-4);
    CHECK(m.matrix()(0, 0) == doctest::Approx(10.0 / 10.0001).epsilon(1e-14));
    CHECK(m.matrix()(1, 0) == doctest::Approx(1e-4 / 10.0001).epsilon(1e-12));
    CHECK(m.matrix()(1, 0) == doctest::Approx(0.99999000009999e-5).epsilon(1e-10));
    CHECK(m.source_counts().has_value());
  }
  SUBCASE("perfect classifier, 100 sites per class") {
    CountMatrix c(3);
    for (int i = 0; i < 3; ++i) c(i, i) = 100;
    const auto m = normalize_confusion(c);
    for (int l = 0; l < 3; ++l) {
      CHECK(m.matrix()(l, l) == doctest::Approx(0.999998000004).epsilon(1e-11));
      CHECK(m.matrix()((l + 1) % 3, l) == doctest::Approx(9.99998000004e-7).epsilon(1e-9));
      CHECK(m.matrix().column_sum(l) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("all-zero column becomes uniform") {
    CountMatrix c(3);
    c(0, 0) = 4;
    c(2, 2) = 4;
    const auto m = normalize_confusion(c);
    for (int r = 0; r < 3; ++r) CHECK(m.matrix()(r, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(normalize_confusion(CountMatrix(2), 0.0), Error);
}

TEST_CASE("property: normalized confusions are strictly positive and column-stochastic") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<std::uint64_t> d(0, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 6;
    CountMatrix c(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < n; ++k) c(r, k) = trial % 3 == 0 ? 0 : d(gen);
    const auto m = normalize_confusion(c);
    for (std::size_t l = 0; l < n; ++l) {
      CHECK(std::abs(m.matrix().column_sum(l) - 1.0) <= 1e-9);
      for (std::size_t r = 0; r < n; ++r) CHECK(m.matrix()(r, l) > 0.0);
    }
  }
}

TEST_CASE("estimation consistency: i.i.d. draws from T recover T") {
  // 10^5 sites per class for 3 classes; binomial sd <= 0.0016 per cell.
  std::mt19937_64 gen(33);
  const auto T = conflens::testing::random_confusion(3, gen, 0.2);
  const LabelSet labels(3);
  const std::size_t per_class = 100000;
  std::vector<Label> gt(3 * per_class), pred(3 * per_class);
  Rng rng(77);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = static_cast<Label>(i / per_class);
    pred[i] = draw_hard_label(T, gt[i], rng);
  }
  const auto counts = accumulate_counts(LabelMap(3, per_class, gt), LabelMap(3, per_class, pred),
                                        PixelMask::full(3, per_class), labels);
  const auto est = normalize_confusion(counts);
  double worst = 0.0;
  for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, std::abs(est.matrix().data()[i] - T.data()[i]));
  CHECK(worst < 0.01);
}

TEST_CASE("border pollution: radius >= 1 ignores border corruption") {
  auto spec = reference_synth_spec();
  spec.n_estimation = 6;
  spec.n_evaluation = 0;
  spec.confusion_jitter = 0.0;
  auto noisy = spec;
  noisy.border_noise = 0.8;
  const LabelSet labels(spec.n_classes);

  auto estimate = [&](const SynthSpec& s, int radius) {
    CountMatrix counts(s.n_classes);
    for (std::size_t i = 0; i < s.n_estimation; ++i) {
      const auto img = generate_image(s, Split::Estimation, i);
      counts = merge_counts(counts, accumulate_counts(img.gt, argmax_labels(img.probs),
                                                      border_mask(img.gt, radius), labels));
    }
    return normalize_confusion(counts);
  };
  auto max_diff = [](const ConfusionModel& a, const ConfusionModel& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.matrix().data().size(); ++i)
      d = std::max(d, std::abs(a.matrix().data()[i] - b.matrix().data()[i]));
    return d;
  };
  for (int radius : {1, 2, 3}) CHECK(max_diff(estimate(noisy, radius), estimate(spec, radius)) <= 1e-9);
  CHECK(max_diff(estimate(noisy, 0), estimate(spec, 0)) > 0.01);
}

TEST_CASE("confusion persistence keeps the matrix to f32 precision") {
  TempDir dir("conf");
  CountMatrix c(3);
  c(0, 0) = 7;
  c(1, 0) = 2;
  c(2, 1) = 5;
  c(2, 2) = 1;
  const auto m = normalize_confusion(c);
  save_confusion(dir / "c.segt", m, {1e-4, 2, 4, 15});
  const auto back = load_confusion(dir / "c.segt");
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(back.matrix().data()[i] - m.matrix().data()[i]) < 1e-7);
  for (std::size_t l = 0; l < 3; ++l) CHECK(std::abs(back.matrix().column_sum(l) - 1.0) <= 1e-12);
  const auto prov = load_confusion_provenance(dir / "c.segt");
  CHECK(prov.radius == 2);
  CHECK(prov.n_images == 4);
  CHECK(prov.n_pixels == 15);
  CHECK(read_text_file(sidecar_path(dir / "c.segt")).find("\"floor\"") != std::string::npos);
}
