#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "sasow/errors.hpp"

namespace sasow {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

inline constexpr double kProbabilityTolerance = 1e-6;
inline constexpr double kCrossEntropyClamp = 1e-12;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

// Checked dense product. Dimension mismatch is an input error rather than an
// Eigen assertion.
template <typename A, typename B>
auto matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw InputError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  using Scalar = typename A::Scalar;
  MatrixX<Scalar> out = a * b;
  return out;
}

/// A distribution over primitive classes: entries in [0,1], summing to 1.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(Vector entries);

  const Vector& entries() const { return entries_; }
  std::ptrdiff_t size() const { return entries_.size(); }
  double operator[](std::ptrdiff_t i) const { return entries_[i]; }
  std::ptrdiff_t argmax() const;

 private:
  Vector entries_;
};

inline ProbabilityVector::ProbabilityVector(Vector entries) : entries_(std::move(entries)) {
  if (entries_.size() == 0) throw InputError("probability vector must be non-empty");
  if (!all_finite(entries_)) throw NumericError("probability vector has non-finite entries");
  if ((entries_.array() < 0.0).any() || (entries_.array() > 1.0).any()) {
    throw InputError("probability entries must lie in [0,1]");
  }
  if (std::abs(entries_.sum() - 1.0) > kProbabilityTolerance) {
    throw InputError("probability entries must sum to 1");
  }
}

// First maximal index.
template <typename Derived>
std::ptrdiff_t argmax(const Eigen::DenseBase<Derived>& v) {
  std::ptrdiff_t best = 0;
  for (std::ptrdiff_t i = 1; i < v.size(); ++i) {
    if (v.derived()(i) > v.derived()(best)) best = i;
  }
  return best;
}

inline std::ptrdiff_t ProbabilityVector::argmax() const { return sasow::argmax(entries_); }

// Max-subtracted softmax; the shift makes softmax(v + c) and softmax(v)
// evaluate the same exponentials.
template <typename Derived>
Vector softmax_values(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw InputError("softmax of an empty vector");
  Vector x = v.template cast<double>();
  if (x.array().isNaN().any()) throw NumericError("softmax: NaN input");
  if (!all_finite(x)) throw NumericError("softmax: infinite input");
  Vector e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

template <typename Derived>
ProbabilityVector softmax(const Eigen::MatrixBase<Derived>& v) {
  return ProbabilityVector(softmax_values(v));
}

// Row-wise softmax used by batched inference.
template <typename Derived>
Matrix softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.row(r) = softmax_values(logits.row(r).transpose()).transpose();
  }
  return out;
}

inline double cross_entropy(const ProbabilityVector& p, std::ptrdiff_t label) {
  if (label < 0 || label >= p.size()) {
    throw InputError("cross_entropy: label " + std::to_string(label) + " out of range");
  }
  return -std::log(std::max(p[label], kCrossEntropyClamp));
}

template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine similarity of a zero vector");
  return a.dot(b) / (na * nb);
}

}  // namespace sasow
