#pragma once

#include <string>
#include <vector>

#include "xltt/gradcheck.hpp"

namespace xltt {

struct ComponentCheck {
  std::string component;
  double max_rel_error = 0.0;
  std::string worst;
  bool passed = false;
};

// Names accepted by the corrupt switch: ops, encoder, maa, objective.
std::vector<std::string> gradient_suite_components();

// Finite-difference verification of every differentiable op, the encoder,
// the fusion stack and the full training objective, across num_seeds random
// fixtures each. A non-empty corrupt_component perturbs that component's
// analytic gradient, which must turn into a reported failure (sensitivity
// self-test). Threshold 1e-4 on the max relative error.
std::vector<ComponentCheck> run_gradient_suite(std::size_t num_seeds,
                                               const std::string& corrupt_component = "");

}  // namespace xltt
