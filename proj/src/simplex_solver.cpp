#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "conflens/priors.hpp"

namespace conflens {

void SolverOptions::validate() const {
  if (max_iters < 1) throw usage_error("solver max_iters must be positive");
  if (!(step_tolerance > 0.0) || !(loss_tolerance > 0.0)) {
    throw usage_error("solver tolerances must be positive");
  }
  if (!(epsilon > 0.0)) throw usage_error("solver epsilon must be positive");
}

nlohmann::json SolverOptions::to_json() const {
  return {{"max_iters", max_iters},
          {"step_tolerance", step_tolerance},
          {"loss_tolerance", loss_tolerance},
          {"epsilon", epsilon},
          {"init", init == SolverInit::Uniform ? "uniform" : "histogram"}};
}

SolverOptions SolverOptions::from_json(const nlohmann::json& j) {
  SolverOptions o;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "max_iters") o.max_iters = value.get<int>();
      else if (key == "step_tolerance") o.step_tolerance = value.get<double>();
      else if (key == "loss_tolerance") o.loss_tolerance = value.get<double>();
      else if (key == "epsilon") o.epsilon = value.get<double>();
      else if (key == "init") {
        const auto s = value.get<std::string>();
        if (s == "uniform") o.init = SolverInit::Uniform;
        else if (s == "histogram") o.init = SolverInit::Histogram;
        else throw usage_error("solver init must be 'uniform' or 'histogram'");
      } else {
        throw usage_error("unknown solver option '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(std::string("bad solver options: ") + e.what());
  }
  o.validate();
  return o;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw usage_error("cannot project an empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) theta = t;
  }
  std::vector<double> out(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::max(v[i] - theta, 0.0);
    sum += out[i];
  }
  // Remove the last few ulps of drift so the result is a valid Prior.
  for (double& x : out) x /= sum;
  return out;
}

SolverResult solve_unconstrained_prior(const ConfusionModel& confusion, const SampleSet& samples,
                                       const SolverOptions& opts) {
  opts.validate();
  if (samples.empty()) throw usage_error("unconstrained prior needs at least one sample");
  const Matrix& T = confusion.matrix();
  const std::size_t n = T.size();
  if (samples.num_labels != n) throw usage_error("samples and confusion disagree on label count");
  for (double v : T.data()) {
    if (!(v > 0.0)) throw usage_error("unconstrained prior requires a strictly positive confusion");
  }

  const auto histogram = sample_histogram_prior(samples).weights();
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  const double histogram_loss = refinement_loss(histogram, T, samples, opts.epsilon);
  const double uniform_loss = refinement_loss(uniform, T, samples, opts.epsilon);
  const bool start_histogram = opts.init == SolverInit::Histogram;
  const double initial_loss = start_histogram ? histogram_loss : uniform_loss;

  std::vector<double> x = start_histogram && histogram_loss <= uniform_loss ? histogram : uniform;
  std::vector<double> grad;
  double f = refinement_loss_with_gradient(x, T, samples, &grad, opts.epsilon);
  if (!std::isfinite(f)) throw internal_error("non-finite loss at the solver start point");

  double step = 0.0;
  {
    double gnorm = 0.0;
    for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
    step = gnorm > 0.0 ? 1.0 / gnorm : 1.0;
  }

  std::vector<double> trial(n), d(n), grad_new;
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iters; ++iter) {
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - step * grad[i];
      trial = project_to_simplex(trial);
      double lin = 0.0, quad = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = trial[i] - x[i];
        lin += grad[i] * d[i];
        quad += d[i] * d[i];
      }
      if (quad == 0.0) break;  // stationary: the projected step is null
      f_new = refinement_loss_with_gradient(trial, T, samples, &grad_new, opts.epsilon);
      // Sufficient decrease for projected gradient; implies f_new < f.
      if (f_new <= f + lin + quad / (2.0 * step) && f_new <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }

    double s_dot_s = 0.0, s_dot_y = 0.0, max_move = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s_dot_s += d[i] * d[i];
      s_dot_y += d[i] * (grad_new[i] - grad[i]);
      max_move = std::max(max_move, std::abs(d[i]));
    }
    const double decrease = f - f_new;
    x = trial;
    grad = grad_new;
    f = f_new;
    if (decrease < opts.loss_tolerance || max_move < opts.step_tolerance) {
      converged = true;
      ++iter;
      break;
    }
    // Barzilai-Borwein trial step for the next iteration.
    step = s_dot_y > 0.0 ? std::clamp(s_dot_s / s_dot_y, 1e-20, 1e20) : step * 2.0;
  }

  auto prior = Prior::normalized(x);
  f = refinement_loss(prior.weights(), T, samples, opts.epsilon);
  return SolverResult{std::move(prior), f, initial_loss, histogram_loss, uniform_loss, iter,
                      converged};
}

}  // namespace conflens
