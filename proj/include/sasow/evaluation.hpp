#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sasow/data.hpp"
#include "sasow/training.hpp"

namespace sasow {

// Ablation variants: base, +attention, +weighting, +both.
enum class Variant { kg_sp, kg_sa, kg_sow, sasow };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
ClassifierKind variant_classifier(Variant v);
bool variant_weighted(Variant v);
Variant variant_for(ClassifierKind kind, bool weighted);
inline constexpr Variant kAllVariants[] = {Variant::kg_sp, Variant::kg_sa, Variant::kg_sow, Variant::sasow};

double harmonic_mean(double seen, double unseen);

// Trapezoidal area under unseen-vs-seen accuracy, points as (seen, unseen).
double auc_from_curve(std::span<const std::pair<double, double>> points);

inline constexpr std::size_t kDefaultBiasPoints = 200;

// {-inf} + sorted distinct margins + {+inf}, with the margins subsampled at
// evenly spaced quantiles so the grid has at most max_points values.
// max_points == 1 gives the single uncalibrated point {0}.
std::vector<double> bias_grid(std::span<const double> margins, std::size_t max_points = kDefaultBiasPoints);

struct BiasCurvePoint {
  double bias = 0.0;
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
  friend bool operator==(const BiasCurvePoint&, const BiasCurvePoint&) = default;
};

struct EvalReport {
  Variant variant = Variant::kg_sp;
  double best_seen = 0.0;
  double best_unseen = 0.0;
  double best_hm = 0.0;
  double auc = 0.0;
  double state_acc = 0.0;
  double object_acc = 0.0;
  double alpha = 1.0;
  std::size_t seen_samples = 0;
  std::size_t unseen_samples = 0;
  std::vector<BiasCurvePoint> curve;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Calibration sweep over precomputed masked score matrices (one per test
/// sample, infeasible cells at kInfeasibleScore). At bias b every cell
/// outside `seen` competes with its score plus b. Fills the composition
/// metrics and the curve; state/object accuracies are left to the caller.
EvalReport evaluate_scores(std::span<const Matrix> masked_scores, std::span<const Composition> labels,
                           const CompositionSet& seen, std::size_t bias_points = kDefaultBiasPoints);

// Prediction for one sample at one bias, with the same rules as the sweep.
Composition predict_with_bias(const Matrix& masked_scores, const CompositionSet& seen, double bias);

/// Open-world generalized evaluation of one variant on the test split.
EvalReport evaluate_open_world(const ClassifierModel& state_model, const ClassifierModel& object_model,
                               const PrimitiveAccuracy& acc, const Dataset& ds, const FeasibilityMask& mask,
                               Variant variant, std::size_t bias_points = kDefaultBiasPoints);

}  // namespace sasow
