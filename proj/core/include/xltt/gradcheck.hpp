#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "xltt/tensor.hpp"

namespace xltt {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central-difference verification of reverse-mode gradients. f must be a
// deterministic scalar function of the given parameters, rebuilt on the
// provided tape each call. Relative error uses denominator
// max(|analytic|, |numeric|, 1e-8).
//
// corrupt perturbs the first analytic coordinate before comparison; it is the
// sensitivity self-test of the oracle (a run with corrupt=true must report a
// large error, otherwise the oracle itself is broken).
GradCheckReport gradcheck(const std::function<Tensor(Tape&)>& f,
                          const std::vector<std::pair<std::string, Tensor>>& params,
                          double step = 1e-5, bool corrupt = false);

// Directional variant for deep compositions: compares the analytic
// directional derivative <grad, v> against central differences along random
// unit directions v spanning all parameters. Per-coordinate differences on a
// deep stack are noise-bound wherever a coordinate's gradient falls under
// the rounding floor of f itself; a random direction aggregates coordinates
// into a derivative of healthy magnitude while still weighting every
// coordinate's error proportionally. worst_param reports the direction
// number.
GradCheckReport gradcheck_directional(const std::function<Tensor(Tape&)>& f,
                                      const std::vector<std::pair<std::string, Tensor>>& params,
                                      std::size_t num_directions, std::uint64_t seed,
                                      double step = 1e-5, bool corrupt = false);

}  // namespace xltt
