#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "conflens/priors.hpp"
#include "test_helpers.hpp"

using namespace conflens;
using conflens::testing::TempDir;

namespace {

Matrix columns(std::initializer_list<std::initializer_list<double>> cols) {
  Matrix m(cols.size());
  std::size_t l = 0;
  for (const auto& col : cols) {
    std::size_t c = 0;
    for (double v : col) m(c++, l) = v;
    ++l;
  }
  return m;
}

ConfusionModel symmetric_two_class() {
  return ConfusionModel::from_matrix(columns({{0.6, 0.4}, {0.4, 0.6}}), 1e-4);
}

// Oracle: P(g | x) by explicit summation over c and l, no shared code path.
double brute_force_loss(const std::vector<double>& p, const Matrix& T, const SampleSet& s,
                        double eps = 1e-10) {
  const std::size_t n = p.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.distribution(i);
    const std::size_t g = s.truth[i];
    double prob = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double m = 0.0;
      for (std::size_t l = 0; l < n; ++l) m += T(c, l) * p[l];
      prob += T(c, g) * p[g] / m * x[c];
    }
    loss -= std::log(std::max(prob, eps));
  }
  return loss;
}

SampleSet random_samples(std::size_t n, std::size_t count, std::mt19937_64& gen) {
  SampleSet s{n, {}, {}};
  std::uniform_int_distribution<int> d(0, static_cast<int>(n) - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = conflens::testing::random_simplex(n, gen, 0.05);
    s.add(static_cast<Label>(d(gen)), std::span<const double>(x));
  }
  return s;
}

std::vector<double> central_differences(const std::vector<double>& p, const Matrix& T,
                                        const SampleSet& s, double h) {
  std::vector<double> g(p.size());
  for (std::size_t l = 0; l < p.size(); ++l) {
    auto up = p, down = p;
    up[l] += h;
    down[l] -= h;
    g[l] = (refinement_loss(up, T, s) - refinement_loss(down, T, s)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("uniform prior") {
  CHECK(uniform_prior(LabelSet(4)).weights() == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(uniform_prior(LabelSet(2)).weights() == std::vector<double>{0.5, 0.5});
  for (std::size_t n : {2u, 4u, 8u, 16u, 64u}) {
    const auto w = uniform_prior(LabelSet(n)).weights();
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == 1.0);
  }
}

TEST_CASE("global prior") {
  const LabelSet two(2);
  std::vector<LabelMap> one{LabelMap(2, 2, {0, 0, 0, 1})};
  CHECK(global_prior(one, two).weights() == std::vector<double>{0.75, 0.25});

  std::vector<LabelMap> zeros{conflens::testing::constant_labels(3, 3, 0),
                              conflens::testing::constant_labels(2, 5, 0)};
  CHECK(global_prior(zeros, two).weights() == std::vector<double>{1.0, 0.0});

  const LabelSet with_void(2, {}, Label{255});
  std::vector<LabelMap> half{LabelMap(2, 2, {255, 1, 255, 1})};
  CHECK(global_prior(half, with_void).weights() == std::vector<double>{0.0, 1.0});

  std::vector<LabelMap> all_void{LabelMap(1, 2, {255, 255})};
  CHECK_THROWS_AS(global_prior(all_void, with_void), Error);
}

TEST_CASE("binary and histogram priors") {
  const LabelSet five(5);
  const LabelMap gt03(2, 3, {0, 3, 3, 3, 0, 3});
  CHECK(binary_prior(gt03, five).weights() == std::vector<double>{0.5, 0, 0, 0.5, 0});

  const auto single = conflens::testing::constant_labels(3, 3, 2);
  CHECK(binary_prior(single, five).weights() == std::vector<double>{0, 0, 1, 0, 0});
  CHECK(histogram_prior(single, five) == binary_prior(single, five));

  const LabelSet three(3);
  const LabelMap all3(1, 3, {2, 0, 1});
  CHECK(binary_prior(all3, three) == uniform_prior(three));

  CHECK(histogram_prior(LabelMap(2, 2, {0, 0, 1, 1}), LabelSet(2)).weights() ==
        std::vector<double>{0.5, 0.5});
  const LabelMap ten(1, 10, {2, 2, 2, 0, 2, 2, 2, 2, 2, 2});
  const auto h = histogram_prior(ten, three);
  CHECK(h[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(h[1] == 0.0);
  CHECK(h[2] == doctest::Approx(0.9).epsilon(1e-15));

  const LabelSet with_void(3, {}, Label{3});
  CHECK_THROWS_AS(binary_prior(LabelMap(1, 2, {3, 3}), with_void), Error);
  CHECK_THROWS_AS(histogram_prior(LabelMap(1, 2, {3, 3}), with_void), Error);
}

TEST_CASE("property: constructors satisfy prior invariants and share support") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const LabelSet labels(n);
    const auto gt = conflens::testing::random_labels(1 + trial % 5, 1 + trial % 4, n, gen);
    for (const auto& p : {binary_prior(gt, labels), histogram_prior(gt, labels), uniform_prior(labels)}) {
      double sum = 0.0;
      for (double w : p.weights()) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    CHECK(binary_prior(gt, labels).support() == histogram_prior(gt, labels).support());
  }
}

TEST_CASE("Prior rejects invalid weights") {
  CHECK_THROWS_AS(Prior({0.5, 0.6}), Error);
  CHECK_THROWS_AS(Prior({1.5, -0.5}), Error);
  CHECK_THROWS_AS(Prior({1.0}), Error);
  CHECK(Prior::normalized({2, 6}).weights() == std::vector<double>{0.25, 0.75});
}

TEST_CASE("refinement_loss examples") {
  const auto T = symmetric_two_class();
  SampleSet s{2, {}, {}};
  const std::vector<double> half{0.5, 0.5};
  s.add(0, std::span<const double>(half));
  const Prior p({0.5, 0.5});
  CHECK(refinement_loss(p, T, s) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(refinement_loss(p, T, s) == doctest::Approx(brute_force_loss(p.weights(), T.matrix(), s)).epsilon(1e-14));

  const auto near_identity = floor_probability_matrix(Matrix::identity(3));
  SampleSet perfect{3, {}, {}};
  const std::vector<double> onehot{0, 1, 0};
  perfect.add(1, std::span<const double>(onehot));
  CHECK(refinement_loss(uniform_prior(LabelSet(3)), near_identity, perfect) < 1e-3);

  // Zero prior on the true class: refined probability is exactly 0.
  SampleSet wrong{2, {}, {}};
  wrong.add(1, std::span<const double>(half));
  CHECK(refinement_loss(Prior({1.0, 0.0}), T, wrong) == -std::log(1e-10));
  CHECK(refinement_loss(Prior({1.0, 0.0}), T, wrong) == doctest::Approx(23.0259).epsilon(1e-5));

  CHECK_THROWS_AS(refinement_loss(p, T, SampleSet{2, {}, {}}), Error);
}

TEST_CASE("property: refinement_loss matches the summation oracle") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const auto T = conflens::testing::random_confusion(n, gen);
    const auto p = conflens::testing::random_simplex(n, gen, trial % 2 ? 0.0 : 0.1);
    const auto s = random_samples(n, 30, gen);
    const double got = refinement_loss(p, T, s);
    CHECK(got == doctest::Approx(brute_force_loss(p, T, s)).epsilon(1e-12));
    CHECK(got >= 0.0);
  }
}

TEST_CASE("refinement_loss gradient") {
  SUBCASE("symmetric instance has equal components") {
    const auto T = symmetric_two_class();
    SampleSet s{2, {}, {}};
    const std::vector<double> half{0.5, 0.5};
    for (int i = 0; i < 3; ++i) {
      s.add(0, std::span<const double>(half));
      s.add(1, std::span<const double>(half));
    }
    const auto g = refinement_loss_gradient(Prior({0.5, 0.5}), T, s);
    CHECK(g[0] == doctest::Approx(g[1]).epsilon(1e-14));
  }
  SUBCASE("single sample matches finite differences") {
    const auto T = symmetric_two_class();
    SampleSet s{2, {}, {}};
    const std::vector<double> half{0.5, 0.5};
    s.add(0, std::span<const double>(half));
    const std::vector<double> p{0.5, 0.5};
    const auto g = refinement_loss_gradient(Prior(p), T, s);
    const auto fd = central_differences(p, T.matrix(), s, 1e-6);
    for (std::size_t l = 0; l < 2; ++l) CHECK(std::abs(g[l] - fd[l]) <= 1e-6);
  }
  SUBCASE("random interior instances match finite differences") {
    std::mt19937_64 gen(15);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + trial % 6;
      const auto T = conflens::testing::random_confusion(n, gen, 0.05);
      const auto p = conflens::testing::random_simplex(n, gen, 0.2);
      const auto s = random_samples(n, 20, gen);
      std::vector<double> g;
      const double loss = refinement_loss_with_gradient(p, T, s, &g);
      CHECK(loss == doctest::Approx(refinement_loss(p, T, s)).epsilon(1e-14));
      const auto fd = central_differences(p, T, s, 1e-6);
      for (std::size_t l = 0; l < n; ++l) {
        const double rel = std::abs(g[l] - fd[l]) / std::max(1.0, std::abs(fd[l]));
        CHECK(rel <= 1e-5);
      }
    }
  }
}

TEST_CASE("property: refinement_loss is invariant under class permutation") {
  std::mt19937_64 gen(16);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const auto T = conflens::testing::random_confusion(n, gen);
    const auto p = conflens::testing::random_simplex(n, gen);
    const auto s = random_samples(n, 15, gen);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Matrix Tp(n);
    std::vector<double> pp(n);
    for (std::size_t a = 0; a < n; ++a) {
      pp[perm[a]] = p[a];
      for (std::size_t b = 0; b < n; ++b) Tp(perm[a], perm[b]) = T(a, b);
    }
    SampleSet sp{n, {}, {}};
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<double> x(n);
      const auto xi = s.distribution(i);
      for (std::size_t a = 0; a < n; ++a) x[perm[a]] = xi[a];
      sp.add(static_cast<Label>(perm[s.truth[i]]), std::span<const double>(x));
    }
    CHECK(refinement_loss(pp, Tp, sp) == doctest::Approx(refinement_loss(p, T, s)).epsilon(1e-12));
  }
}

TEST_CASE("project_to_simplex") {
  const std::vector<double> inside{0.2, 0.3, 0.5};
  const auto same = project_to_simplex(inside);
  for (int i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(inside[i]).epsilon(1e-15));
  const std::vector<double> far{3.0, 0.0, -1.0};
  CHECK(project_to_simplex(far) == std::vector<double>{1.0, 0.0, 0.0});
  const std::vector<double> shift{1.0, 1.0};
  const auto half = project_to_simplex(shift);
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));

  // Oracle: the projection is the closest point among a dense 2-simplex grid.
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd(0.3, 0.6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> v{nd(gen), nd(gen), nd(gen)};
    const auto proj = project_to_simplex(v);
    auto dist = [&](double a, double b, double c) {
      return (a - v[0]) * (a - v[0]) + (b - v[1]) * (b - v[1]) + (c - v[2]) * (c - v[2]);
    };
    double best = 1e300;
    const int k = 400;
    for (int i = 0; i <= k; ++i)
      for (int j = 0; i + j <= k; ++j) best = std::min(best, dist(double(i) / k, double(j) / k, double(k - i - j) / k));
    CHECK(dist(proj[0], proj[1], proj[2]) <= best + 1e-12);
  }
}

TEST_CASE("solver: samples of one class converge toward that vertex") {
  std::mt19937_64 gen(23);
  const auto T = ConfusionModel::from_matrix(columns({{0.7, 0.2, 0.1}, {0.15, 0.7, 0.15}, {0.1, 0.2, 0.7}}), 1e-4);
  SampleSet s{3, {}, {}};
  for (int i = 0; i < 25; ++i) {
    const auto x = conflens::testing::random_simplex(3, gen, 0.1);
    s.add(2, std::span<const double>(x));
  }
  const auto r = solve_unconstrained_prior(T, s);
  CHECK(r.prior[2] > 0.999);
  CHECK(r.loss <= r.histogram_loss + 1e-9);
  CHECK(r.loss <= r.uniform_loss + 1e-9);

  // Grid oracle over the 2-simplex: no grid point beats the vertex.
  const auto vertex = refinement_loss(std::vector<double>{0, 0, 1}, T.matrix(), s);
  const int k = 50;
  for (int i = 0; i <= k; ++i)
    for (int j = 0; i + j <= k; ++j) {
      const std::vector<double> p{double(i) / k, double(j) / k, double(k - i - j) / k};
      CHECK(refinement_loss(p, T.matrix(), s) >= vertex - 1e-12);
    }
  CHECK(r.loss <= vertex + 1e-6);
}

TEST_CASE("solver: symmetric two-class instance stays at the centre") {
  const auto T = symmetric_two_class();
  SampleSet s{2, {}, {}};
  const std::vector<double> half{0.5, 0.5};
  s.add(0, std::span<const double>(half));
  s.add(1, std::span<const double>(half));
  for (auto init : {SolverInit::Histogram, SolverInit::Uniform}) {
    SolverOptions opts;
    opts.init = init;
    const auto r = solve_unconstrained_prior(T, s, opts);
    CHECK(std::abs(r.prior[0] - 0.5) <= 1e-3);
  }
  // Grid oracle on the 1-simplex.
  double best_p = 0.0, best = 1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double a = i / 1000.0;
    const double v = refinement_loss(std::vector<double>{a, 1 - a}, T.matrix(), s);
    if (v < best) best = v, best_p = a;
  }
  CHECK(std::abs(best_p - 0.5) <= 1e-3);
}

TEST_CASE("property: solver dominates its starting points and the grid") {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const auto T = ConfusionModel::from_matrix(conflens::testing::random_confusion(n, gen, 0.05), 1e-4);
    const auto s = random_samples(n, 40, gen);
    SolverOptions opts;
    opts.init = trial % 2 ? SolverInit::Uniform : SolverInit::Histogram;
    const auto r = solve_unconstrained_prior(T, s, opts);
    CHECK(r.loss <= r.initial_loss + 1e-9);
    CHECK(r.loss <= r.histogram_loss + 1e-9);
    CHECK(r.loss <= r.uniform_loss + 1e-9);
    CHECK(r.loss == doctest::Approx(refinement_loss(r.prior, T, s)).epsilon(1e-12));
    CHECK(r.histogram_loss == doctest::Approx(refinement_loss(sample_histogram_prior(s), T, s)).epsilon(1e-12));
    if (n == 2) {
      double best = 1e300;
      for (int i = 0; i <= 2000; ++i) {
        const double a = i / 2000.0;
        best = std::min(best, refinement_loss(std::vector<double>{a, 1 - a}, T.matrix(), s));
      }
      CHECK(r.loss <= best + 1e-6);
    }
  }
}

TEST_CASE("solver rejects bad input") {
  CHECK_THROWS_AS(solve_unconstrained_prior(symmetric_two_class(), SampleSet{2, {}, {}}), Error);
  SolverOptions bad;
  bad.loss_tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(SolverOptions::from_json(nlohmann::json{{"max_itres", 3}}), Error);
  const auto round = SolverOptions::from_json(SolverOptions{}.to_json());
  CHECK(round.max_iters == 500);
  CHECK(round.init == SolverInit::Histogram);
}

TEST_CASE("collect_samples respects mask, void and the cap") {
  std::mt19937_64 gen(6);
  const LabelSet labels(3, {}, Label{3});
  const auto probs = conflens::testing::random_map(6, 6, 3, gen);
  auto gt = conflens::testing::random_labels(6, 6, 4, gen);
  const auto mask = PixelMask::full(6, 6);
  std::size_t non_void = 0;
  for (std::size_t s = 0; s < 36; ++s) non_void += gt[s] != 3;
  const auto all = collect_samples(probs, gt, mask, labels, 1000, 1);
  CHECK(all.size() == non_void);
  const auto few = collect_samples(probs, gt, mask, labels, 5, 1);
  CHECK(few.size() == std::min<std::size_t>(5, non_void));
  CHECK(collect_samples(probs, gt, mask, labels, 5, 1).probs == few.probs);
}

TEST_CASE("prior kinds and banks") {
  for (auto k : {PriorKind::Uniform, PriorKind::Global, PriorKind::Binary, PriorKind::Histogram,
                 PriorKind::Unconstrained})
    CHECK(parse_prior_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_prior_kind("flat"), Error);

  TempDir dir("bank");
  PriorBank bank{PriorKind::Histogram, {"a", "b"}, {Prior({0.25, 0.75}), Prior({1.0, 0.0})}, std::nullopt};
  save_prior_bank(dir / "p.segt", bank);
  const auto back = load_prior_bank(dir / "p.segt");
  CHECK(back.kind == PriorKind::Histogram);
  CHECK(back.ids == bank.ids);
  CHECK(back.for_image("a").weights() == std::vector<double>{0.25, 0.75});
  CHECK(back.for_image("b").weights() == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(back.for_image("c"), Error);
}
