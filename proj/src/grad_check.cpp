#include "ebgcn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ebgcn::num {

FdReport finite_difference_check(const LossFn& loss_fn, const GradFn& grad_fn,
                                 const ParamMap64& params, double h, double tol) {
  if (h <= 0) throw NumericError("finite_difference_check: h must be positive");

  const ParamMap64 analytic = grad_fn(params);

  FdReport report;
  report.tolerance = tol;
  ParamMap64 work = params;

  for (const auto& [name, tensor] : params) {
    const auto it = analytic.find(name);
    if (it == analytic.end()) throw NumericError("finite_difference_check: no gradient for " + name);
    const Tensor64& grad = it->second;

    FdEntry entry;
    entry.name = name;
    Tensor64& wt = work[name];
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double keep = wt.at_flat(i);
      wt.at_flat(i) = keep + h;
      const double fp = loss_fn(work);
      wt.at_flat(i) = keep - h;
      const double fm = loss_fn(work);
      wt.at_flat(i) = keep;

      const double fd = (fp - fm) / (2.0 * h);
      const double an = grad.at_flat(i);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - an) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_tensor.push_back(std::move(entry));
  }

  report.passed = report.max_rel_err <= tol;
  return report;
}

}  // namespace ebgcn::num
