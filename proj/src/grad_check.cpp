#include "sasow/grad_check.hpp"

#include <algorithm>
#include <vector>

namespace sasow {

namespace {

double evaluate(const TapedScalarFn& f) {
  Tape tape;
  Var out = f(tape);
  if (out.value().size() != 1) throw InputError("grad_check: function must return a scalar");
  return out.value()(0, 0);
}

}  // namespace

GradCheckResult grad_check(const TapedScalarFn& f, std::span<Matrix* const> params, double eps) {
  if (!(eps > 0.0)) throw InputError("grad_check: eps must be positive");
  for (const Matrix* p : params) {
    if (!all_finite(*p)) throw NumericError("grad_check: non-finite parameter");
  }

  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var out = f(tape);
    tape.backward(out);
    for (const Matrix* p : params) {
      analytic.push_back(tape.gradient(*p));
      if (!all_finite(analytic.back())) throw NumericError("grad_check: non-finite gradient");
    }
  }

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double original = p.data()[j];
      p.data()[j] = original + eps;
      const double up = evaluate(f);
      p.data()[j] = original - eps;
      const double down = evaluate(f);
      p.data()[j] = original;

      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic[i].data()[j];
      if (!std::isfinite(fd)) throw NumericError("grad_check: non-finite finite difference");
      const double denom = std::max({1.0, std::abs(an), std::abs(fd)});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(an - fd) / denom);
      ++result.entries_checked;
    }
  }
  return result;
}

}  // namespace sasow
