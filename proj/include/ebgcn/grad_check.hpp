#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ebgcn/tape.hpp"

namespace ebgcn::num {

struct FdEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct FdReport {
  std::vector<FdEntry> per_tensor;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

using LossFn = std::function<double(const ParamMap64&)>;
using GradFn = std::function<ParamMap64(const ParamMap64&)>;

// Central-difference check of grad_fn against loss_fn, entry by entry.
// Relative error uses denominator max(|fd|, |analytic|, 1e-8). loss_fn must
// be deterministic; any internal sampling has to replay identically so the
// +h and -h evaluations see the same noise.
FdReport finite_difference_check(const LossFn& loss_fn, const GradFn& grad_fn,
                                 const ParamMap64& params, double h, double tol);

}  // namespace ebgcn::num
