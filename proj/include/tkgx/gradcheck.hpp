#pragma once

// Central-difference verification of tape gradients.

#include <cstddef>
#include <functional>
#include <string>

#include "tkgx/autodiff.hpp"
#include "tkgx/parameters.hpp"

namespace tkgx {

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor so that gradients that are both ~0 compare as equal.
  double floor = 1e-6;
  std::size_t max_entries_per_tensor = 0;  // 0: every entry
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[<index>]"
  std::size_t entries_checked = 0;
};

// `loss` must build the same scalar on any tape it is given. Parameter values
// are restored afterwards; gradients hold the analytic result.
GradCheckResult check_gradients(ParameterSet& params,
                                const std::function<ad::Var(ad::Tape&)>& loss,
                                const GradCheckOptions& opts = {});

}  // namespace tkgx
