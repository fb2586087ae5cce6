#include "dynembed/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dynembed::nn {

namespace {

double evaluate(const LossClosure& loss) {
  Tape tape;
  return tape.value(loss(tape))(0, 0);
}

}  // namespace

GradCheckReport finite_diff_check(const LossClosure& loss, ParamStore& store,
                                  const GradCheckOptions& options) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }

  GradCheckReport report;
  for (auto& [name, p] : store) {
    const Matrix analytic = p.grad;
    ParamCheck check{name};
    const auto total = static_cast<std::size_t>(p.value.size());
    const std::size_t stride =
        options.max_entries == 0 || total <= options.max_entries
            ? 1
            : (total + options.max_entries - 1) / options.max_entries;
    for (std::size_t i = 0; i < total; i += stride) {
      double& w = p.value.data()[i];
      const double saved = w;
      w = saved + options.step;
      const double up = evaluate(loss);
      w = saved - options.step;
      const double down = evaluate(loss);
      w = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(a - numeric) / denom);
      ++check.entries_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  store.zero_grad();
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace dynembed::nn
