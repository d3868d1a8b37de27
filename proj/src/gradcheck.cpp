#include "tkgx/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tkgx {

GradCheckResult check_gradients(ParameterSet& params,
                                const std::function<ad::Var(ad::Tape&)>& loss,
                                const GradCheckOptions& opts) {
  params.zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    ad::Tape tape(false);
    return loss(tape).scalar();
  };
  GradCheckResult r;
  for (auto& [name, p] : params.all()) {
    const std::size_t n = opts.max_entries_per_tensor
                              ? std::min(opts.max_entries_per_tensor, p.size())
                              : p.size();
    // Spread the checked entries over the tensor.
    const std::size_t stride = n ? std::max<std::size_t>(1, p.size() / n) : 1;
    for (std::size_t k = 0, i = 0; k < n && i < p.size(); ++k, i += stride) {
      const double saved = p.value[i];
      p.value[i] = saved + opts.step;
      const double up = eval();
      p.value[i] = saved - opts.step;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++r.entries_checked;
      if (rel > r.max_rel_error || std::isnan(rel)) {
        r.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

}  // namespace tkgx
