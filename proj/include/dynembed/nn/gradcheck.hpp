#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dynembed/nn/params.hpp"
#include "dynembed/nn/tape.hpp"

namespace dynembed::nn {

// Builds a scalar (1 x 1) loss on the given tape from the store's current
// parameter values. Must be deterministic.
using LossClosure = std::function<Var(Tape&)>;

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor): entries whose gradient
  // is below the floor are compared absolutely against it.
  double floor = 1e-5;
  // Entries per parameter to perturb; larger parameters are strided.
  std::size_t max_entries = 0;  // 0 = all
};

// Compares the tape gradient of the closure against central differences.
GradCheckReport finite_diff_check(const LossClosure& loss, ParamStore& store,
                                  const GradCheckOptions& options = {});

}  // namespace dynembed::nn
