#pragma once

#include <functional>
#include <span>

#include "sasow/tape.hpp"

namespace sasow {

// A scalar function of some parameter matrices, recorded on the supplied
// tape. It must register each parameter through Tape::parameter.
using TapedScalarFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients against central finite differences.
///
/// The relative error per entry is |analytic - fd| / max(1, |analytic|, |fd|);
/// the maximum over all entries of all params is returned. Parameters are
/// perturbed in place and restored before returning.
GradCheckResult grad_check(const TapedScalarFn& f, std::span<Matrix* const> params, double eps = 1e-5);

}  // namespace sasow
