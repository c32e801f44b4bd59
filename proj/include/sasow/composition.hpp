#pragma once

#include <compare>
#include <limits>

#include "sasow/feasibility_mask.hpp"
#include "sasow/numerics.hpp"

namespace sasow {

// A (state, object) cell of the open-world composition space.
struct Composition {
  Eigen::Index state = 0;
  Eigen::Index object = 0;
  friend auto operator<=>(const Composition&, const Composition&) = default;
};

// Score of a masked-out cell. Distinct from a genuine zero score.
inline constexpr double kInfeasibleScore = -std::numeric_limits<double>::infinity();

struct CompositionScoreMatrix {
  Matrix scores;  // states x objects
  bool weighted = false;
};

// Exponent applied to state probabilities: A_sta / A_obj.
class WeightExponent {
 public:
  static WeightExponent identity() { return WeightExponent(1.0); }
  static WeightExponent from_accuracies(double state_accuracy, double object_accuracy);
  double alpha() const { return alpha_; }

 private:
  explicit WeightExponent(double alpha) : alpha_(alpha) {}
  double alpha_;
};

inline WeightExponent WeightExponent::from_accuracies(double a_sta, double a_obj) {
  if (!(a_sta > 0.0) || !(a_obj > 0.0) || !std::isfinite(a_sta) || !std::isfinite(a_obj)) {
    throw InputError("weighting needs positive state and object accuracies");
  }
  return WeightExponent(a_sta / a_obj);
}

// Joint scores p_sta[i] * p_obj[j]. Each cell is a single product, so the
// result is exact in 64-bit arithmetic.
template <typename A, typename B>
Matrix outer_scores(const Eigen::MatrixBase<A>& p_sta, const Eigen::MatrixBase<B>& p_obj) {
  if (p_sta.size() == 0 || p_obj.size() == 0) throw InputError("compose: empty probability vector");
  Matrix s(p_sta.size(), p_obj.size());
  for (Eigen::Index i = 0; i < p_sta.size(); ++i) {
    for (Eigen::Index j = 0; j < p_obj.size(); ++j) s(i, j) = p_sta(i) * p_obj(j);
  }
  return s;
}

inline CompositionScoreMatrix compose(const ProbabilityVector& p_sta, const ProbabilityVector& p_obj) {
  return {outer_scores(p_sta.entries(), p_obj.entries()), false};
}

// Raises every state probability to alpha without renormalizing.
template <typename Derived>
Vector weight_state_probs(const Eigen::MatrixBase<Derived>& p_sta, WeightExponent w) {
  if ((p_sta.array() < 0.0).any() || (p_sta.array() > 1.0).any()) {
    throw InputError("weight_state_probs: entries must lie in [0,1]");
  }
  if (w.alpha() == 1.0) return p_sta;
  return p_sta.array().pow(w.alpha()).matrix();
}

inline Vector weight_state_probs(const ProbabilityVector& p_sta, double a_sta, double a_obj) {
  return weight_state_probs(p_sta.entries(), WeightExponent::from_accuracies(a_sta, a_obj));
}

inline CompositionScoreMatrix compose_weighted(const ProbabilityVector& p_sta, const ProbabilityVector& p_obj,
                                               WeightExponent w) {
  return {outer_scores(weight_state_probs(p_sta.entries(), w), p_obj.entries()), true};
}

inline CompositionScoreMatrix compose_weighted(const ProbabilityVector& p_sta, const ProbabilityVector& p_obj,
                                               double a_sta, double a_obj) {
  return compose_weighted(p_sta, p_obj, WeightExponent::from_accuracies(a_sta, a_obj));
}

inline CompositionScoreMatrix apply_mask(CompositionScoreMatrix s, const FeasibilityMask& mask) {
  if (s.scores.rows() != mask.states() || s.scores.cols() != mask.objects()) {
    throw InputError("apply_mask: mask is " + std::to_string(mask.states()) + "x" +
                     std::to_string(mask.objects()) + " but scores are " + std::to_string(s.scores.rows()) +
                     "x" + std::to_string(s.scores.cols()));
  }
  s.scores = mask.grid().select(s.scores, kInfeasibleScore);
  return s;
}

// Highest-scoring feasible cell; ties go to the lowest state, then object.
inline Composition predict_composition(const Matrix& scores) {
  Composition best{-1, -1};
  double best_score = kInfeasibleScore;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (scores(i, j) > best_score) {
        best_score = scores(i, j);
        best = {i, j};
      }
    }
  }
  if (best.state < 0) throw PredictionError("no feasible composition to predict");
  return best;
}

inline Composition predict_composition(const CompositionScoreMatrix& s) { return predict_composition(s.scores); }

}  // namespace sasow
