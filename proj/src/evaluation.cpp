#include "sasow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace sasow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kg_sp: return "kg-sp";
    case Variant::kg_sa: return "kg-sa";
    case Variant::kg_sow: return "kg-sow";
    case Variant::sasow: return "sasow";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw InputError("unknown variant '" + name + "' (expected kg-sp, kg-sa, kg-sow or sasow)");
}

ClassifierKind variant_classifier(Variant v) {
  return v == Variant::kg_sa || v == Variant::sasow ? ClassifierKind::attention : ClassifierKind::mlp;
}

bool variant_weighted(Variant v) { return v == Variant::kg_sow || v == Variant::sasow; }

Variant variant_for(ClassifierKind kind, bool weighted) {
  if (kind == ClassifierKind::mlp) return weighted ? Variant::kg_sow : Variant::kg_sp;
  return weighted ? Variant::sasow : Variant::kg_sa;
}

double harmonic_mean(double s, double u) {
  if (!(s >= 0.0 && s <= 1.0) || !(u >= 0.0 && u <= 1.0)) throw InputError("harmonic_mean: inputs must lie in [0,1]");
  if (s + u == 0.0) return 0.0;
  return 2.0 * s * u / (s + u);
}

double auc_from_curve(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw InputError("auc_from_curve: need at least 2 points");
  std::vector<std::pair<double, double>> pts(points.begin(), points.end());
  for (const auto& [s, u] : pts) {
    if (!(s >= 0.0 && s <= 1.0) || !(u >= 0.0 && u <= 1.0)) throw InputError("auc_from_curve: accuracies must lie in [0,1]");
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  double max_unseen = 0.0;
  for (const auto& p : pts) max_unseen = std::max(max_unseen, p.second);
  pts.insert(pts.begin(), {0.0, max_unseen});
  pts.push_back(pts.back());

  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  }
  return area;
}

std::vector<double> bias_grid(std::span<const double> margins, std::size_t max_points) {
  if (max_points == 0) throw InputError("bias_grid: need at least one point");
  if (max_points == 1) return {0.0};
  std::vector<double> m;
  for (double v : margins) {
    if (std::isfinite(v)) m.push_back(v);
  }
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());

  const std::size_t interior = max_points - 2;
  std::vector<double> grid{-kInf};
  if (m.size() <= interior) {
    grid.insert(grid.end(), m.begin(), m.end());
  } else if (interior == 1) {
    grid.push_back(m[(m.size() - 1) / 2]);
  } else if (interior > 1) {
    for (std::size_t i = 0; i < interior; ++i) {
      const auto idx = static_cast<std::size_t>(
          std::llround(static_cast<double>(i) * static_cast<double>(m.size() - 1) / static_cast<double>(interior - 1)));
      if (grid.back() != m[idx]) grid.push_back(m[idx]);
    }
  }
  grid.push_back(kInf);
  return grid;
}

namespace {

struct Candidate {
  Composition cell;
  double score;
};

// Best feasible seen cell and best feasible unseen cell of one sample.
struct SampleSummary {
  std::optional<Candidate> seen;
  std::optional<Candidate> unseen;
};

SampleSummary summarize(const Matrix& scores, const CompositionSet& seen) {
  SampleSummary out;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const double v = scores(i, j);
      if (v == kInfeasibleScore) continue;
      auto& slot = seen.count({i, j}) ? out.seen : out.unseen;
      if (!slot || v > slot->score) slot = Candidate{{i, j}, v};
    }
  }
  if (!out.seen && !out.unseen) throw PredictionError("no feasible composition to predict");
  return out;
}

Composition decide(const SampleSummary& s, double bias) {
  if (!s.unseen) return s.seen->cell;
  if (!s.seen) return s.unseen->cell;
  if (bias == -kInf) return s.seen->cell;
  if (bias == kInf) return s.unseen->cell;
  // Compared against the margin itself so a grid point equal to a sample's
  // margin lands exactly on the tie, which the seen cell keeps.
  return bias > s.seen->score - s.unseen->score ? s.unseen->cell : s.seen->cell;
}

}  // namespace

Composition predict_with_bias(const Matrix& masked_scores, const CompositionSet& seen, double bias) {
  return decide(summarize(masked_scores, seen), bias);
}

EvalReport evaluate_scores(std::span<const Matrix> masked_scores, std::span<const Composition> labels,
                           const CompositionSet& seen, std::size_t bias_points) {
  if (masked_scores.size() != labels.size()) throw InputError("evaluate: one label per score matrix required");
  std::vector<SampleSummary> summaries;
  std::vector<double> margins;
  std::size_t n_seen = 0, n_unseen = 0;
  for (std::size_t i = 0; i < masked_scores.size(); ++i) {
    summaries.push_back(summarize(masked_scores[i], seen));
    const auto& s = summaries.back();
    if (s.seen && s.unseen) margins.push_back(s.seen->score - s.unseen->score);
    (seen.count(labels[i]) ? n_seen : n_unseen) += 1;
  }
  if (n_seen == 0 || n_unseen == 0) {
    throw InputError("evaluate: test set needs samples of both seen and unseen compositions");
  }

  EvalReport report;
  report.seen_samples = n_seen;
  report.unseen_samples = n_unseen;
  for (double b : bias_grid(margins, bias_points)) {
    std::size_t seen_hits = 0, unseen_hits = 0;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      if (decide(summaries[i], b) != labels[i]) continue;
      (seen.count(labels[i]) ? seen_hits : unseen_hits) += 1;
    }
    BiasCurvePoint p{b, static_cast<double>(seen_hits) / static_cast<double>(n_seen),
                     static_cast<double>(unseen_hits) / static_cast<double>(n_unseen)};
    if (!report.curve.empty() &&
        (p.seen_acc > report.curve.back().seen_acc || p.unseen_acc < report.curve.back().unseen_acc)) {
      throw std::logic_error("bias sweep is not monotone");
    }
    report.curve.push_back(p);
  }

  std::vector<std::pair<double, double>> pts;
  for (const auto& p : report.curve) {
    report.best_seen = std::max(report.best_seen, p.seen_acc);
    report.best_unseen = std::max(report.best_unseen, p.unseen_acc);
    report.best_hm = std::max(report.best_hm, harmonic_mean(p.seen_acc, p.unseen_acc));
    pts.emplace_back(p.seen_acc, p.unseen_acc);
  }
  if (pts.size() == 1) pts.push_back(pts.front());
  report.auc = auc_from_curve(pts);
  return report;
}

EvalReport evaluate_open_world(const ClassifierModel& state_model, const ClassifierModel& object_model,
                               const PrimitiveAccuracy& acc, const Dataset& ds, const FeasibilityMask& mask,
                               Variant variant, std::size_t bias_points) {
  const ClassifierKind needed = variant_classifier(variant);
  if (state_model.kind() != needed || object_model.kind() != needed) {
    throw InputError("variant " + to_string(variant) + " needs " + to_string(needed) + " classifiers");
  }
  if (state_model.class_count() != ds.vocab.state_count() || object_model.class_count() != ds.vocab.object_count() ||
      state_model.input_dim() != ds.dim() || object_model.input_dim() != ds.dim()) {
    throw InputError("model and dataset dimensions disagree");
  }
  if (mask.states() != ds.vocab.state_count() || mask.objects() != ds.vocab.object_count()) {
    throw InputError("mask and dataset vocabulary disagree");
  }
  require_seen_feasible(mask, ds.split.seen);

  const auto rows = ds.indices(Split::test);
  if (rows.empty()) throw InputError("evaluate: dataset has no test samples");
  const WeightExponent w =
      variant_weighted(variant) ? WeightExponent::from_accuracies(acc.a_sta, acc.a_obj) : WeightExponent::identity();

  const Matrix x = ds.gather(rows);
  const Matrix p_sta = predict_probs_batch(state_model, x);
  const Matrix p_obj = predict_probs_batch(object_model, x);

  std::vector<Matrix> scores;
  std::vector<Composition> labels;
  std::vector<Eigen::Index> state_pred, state_truth, object_pred, object_truth;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const ProbabilityVector ps(p_sta.row(r).transpose());
    const ProbabilityVector po(p_obj.row(r).transpose());
    CompositionScoreMatrix s = variant_weighted(variant) ? compose_weighted(ps, po, w) : compose(ps, po);
    scores.push_back(apply_mask(std::move(s), mask).scores);
    const auto& sample = ds.samples[rows[i]];
    labels.push_back(sample.composition());
    state_pred.push_back(ps.argmax());
    object_pred.push_back(po.argmax());
    state_truth.push_back(sample.state);
    object_truth.push_back(sample.object);
  }

  EvalReport report = evaluate_scores(scores, labels, ds.split.seen, bias_points);
  report.variant = variant;
  report.alpha = w.alpha();
  report.state_acc = accuracy(state_pred, state_truth);
  report.object_acc = accuracy(object_pred, object_truth);
  return report;
}

}  // namespace sasow
