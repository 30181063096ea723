#include "xltt/gradcheck.hpp"

#include "xltt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xltt {

namespace {

double eval(const std::function<Tensor(Tape&)>& f) {
  Tape tape;
  const double v = f(tape).item();
  if (!std::isfinite(v)) throw std::runtime_error("gradcheck: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport gradcheck(const std::function<Tensor(Tape&)>& f,
                          const std::vector<std::pair<std::string, Tensor>>& params,
                          double step, bool corrupt) {
  if (step <= 0.0) throw std::invalid_argument("gradcheck: step must be positive");

  // Analytic pass.
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    if (!std::isfinite(loss.item()))
      throw std::runtime_error("gradcheck: non-finite function value");
    for (auto& [name, p] : params) {
      (void)name;
      const_cast<Tensor&>(p).grad_buffer();
      const_cast<Tensor&>(p).zero_grad();
    }
    tape.backward(loss);
    for (const auto& [name, p] : params) {
      (void)name;
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    }
  }

  if (corrupt && !analytic.empty() && !analytic[0].empty())
    analytic[0][0] += std::abs(analytic[0][0]) + 1.0;

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values()[i];
      p.values()[i] = saved + step;
      const double fp = eval(f);
      p.values()[i] = saved - step;
      const double fm = eval(f);
      p.values()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].first;
        report.worst_index = i;
      }
    }
  }
  return report;
}

GradCheckReport gradcheck_directional(const std::function<Tensor(Tape&)>& f,
                                      const std::vector<std::pair<std::string, Tensor>>& params,
                                      std::size_t num_directions, std::uint64_t seed,
                                      double step, bool corrupt) {
  if (step <= 0.0) throw std::invalid_argument("gradcheck: step must be positive");
  if (num_directions == 0)
    throw std::invalid_argument("gradcheck: need at least one direction");

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    if (!std::isfinite(loss.item()))
      throw std::runtime_error("gradcheck: non-finite function value");
    for (auto& [name, p] : params) {
      (void)name;
      const_cast<Tensor&>(p).grad_buffer();
      const_cast<Tensor&>(p).zero_grad();
    }
    tape.backward(loss);
    for (const auto& [name, p] : params) {
      (void)name;
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    }
  }

  if (corrupt && !analytic.empty() && !analytic[0].empty())
    analytic[0][0] += std::abs(analytic[0][0]) + 1.0;

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t d = 0; d < num_directions; ++d) {
    std::vector<std::vector<double>> direction(params.size());
    double norm = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      direction[pi].resize(analytic[pi].size());
      for (double& v : direction[pi]) {
        v = rng.normal();
        norm += v * v;
      }
    }
    norm = std::sqrt(norm);

    double along = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi)
      for (std::size_t i = 0; i < direction[pi].size(); ++i) {
        direction[pi][i] /= norm;
        along += analytic[pi][i] * direction[pi][i];
      }

    std::vector<std::vector<double>> saved(params.size());
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      const Tensor& p = params[pi].second;
      saved[pi].assign(p.values().begin(), p.values().end());
    }
    auto set_shifted = [&](double h) {
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi].second;
        for (std::size_t i = 0; i < p.size(); ++i)
          p.values()[i] = saved[pi][i] + h * direction[pi][i];
      }
    };
    set_shifted(step);
    const double fp = eval(f);
    set_shifted(-step);
    const double fm = eval(f);
    set_shifted(0.0);

    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(along), std::abs(numeric), 1e-8});
    const double rel = std::abs(along - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = "direction";
      report.worst_index = d;
    }
  }
  return report;
}

}  // namespace xltt
