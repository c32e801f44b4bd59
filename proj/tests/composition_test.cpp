#include <random>

#include <gtest/gtest.h>

#include "sasow/composition.hpp"

namespace sasow {
namespace {

ProbabilityVector pv(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return ProbabilityVector(v);
}

ProbabilityVector random_probs(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 2.0);
  Vector z(n);
  for (auto& x : z) x = d(rng);
  return softmax(z);
}

FeasibilityMask forbid(Eigen::Index s, Eigen::Index o, Eigen::Index states, Eigen::Index objects) {
  BoolGrid g = BoolGrid::Constant(states, objects, true);
  g(s, o) = false;
  return FeasibilityMask(g, MaskProvenance::file);
}

TEST(Compose, OuterProductOfTwoByThree) {
  auto s = compose(pv({0.6, 0.4}), pv({0.5, 0.3, 0.2}));
  Matrix expected(2, 3);
  expected << 0.30, 0.18, 0.12, 0.20, 0.12, 0.08;
  EXPECT_FALSE(s.weighted);
  EXPECT_LT((s.scores - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Compose, SixCombinationScores) {
  const double p1 = 0.7, p2 = 0.3, q1 = 0.2, q2 = 0.5, q3 = 0.3;
  auto s = compose(pv({p1, p2}), pv({q1, q2, q3}));
  const double expected[] = {p1 * q1, p1 * q2, p1 * q3, p2 * q1, p2 * q2, p2 * q3};
  for (int k = 0; k < 6; ++k) EXPECT_EQ(s.scores(k / 3, k % 3), expected[k]);
}

TEST(Compose, OneHotInputsGiveOneHotCell) {
  auto s = compose(pv({1, 0}), pv({0, 1, 0}));
  EXPECT_EQ(s.scores.sum(), 1.0);
  EXPECT_EQ(s.scores(0, 1), 1.0);
}

TEST(Compose, EmptyVectorIsInputError) {
  EXPECT_THROW(outer_scores(Vector(), Vector::Ones(2)), InputError);
}

TEST(Compose, JointDistributionSumsToOneAndIsExact) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_probs(1 + trial % 7, rng), q = random_probs(1 + trial % 11, rng);
    auto s = compose(p, q);
    EXPECT_NEAR(s.scores.sum(), 1.0, 1e-6);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      for (Eigen::Index j = 0; j < q.size(); ++j) EXPECT_EQ(s.scores(i, j), p[i] * q[j]);
    }
  }
}

TEST(Weighting, IdentityExponentReturnsInput) {
  auto p = pv({0.6, 0.4});
  EXPECT_EQ(weight_state_probs(p, 0.7, 0.7), p.entries());
}

TEST(Weighting, OneHotIsFixed) {
  auto p = pv({0, 1, 0});
  for (double a_sta : {0.1, 0.5, 0.9}) EXPECT_EQ(weight_state_probs(p, a_sta, 0.5), p.entries());
}

TEST(Weighting, FractionalExponentValues) {
  Vector w = weight_state_probs(pv({0.6, 0.4}), 0.2, 1.0);
  EXPECT_NEAR(w[0], 0.9029, 1e-4);
  EXPECT_NEAR(w[1], 0.8326, 1e-4);
  EXPECT_NEAR(w[0], 0.9028804514474342, 1e-15);
  EXPECT_NEAR(w[1], 0.8325532074018731, 1e-15);
}

TEST(Weighting, NonPositiveAccuracyIsInputError) {
  EXPECT_THROW(weight_state_probs(pv({0.5, 0.5}), 0.0, 0.5), InputError);
  EXPECT_THROW(weight_state_probs(pv({0.5, 0.5}), 0.5, -1.0), InputError);
  EXPECT_THROW(compose_weighted(pv({1}), pv({1}), 0.5, 0.0), InputError);
}

TEST(Weighting, EqualAccuraciesMatchUnweighted) {
  auto p = pv({0.2, 0.5, 0.3}), q = pv({0.9, 0.1});
  auto w = compose_weighted(p, q, 0.4, 0.4);
  EXPECT_TRUE(w.weighted);
  EXPECT_EQ(w.scores, compose(p, q).scores);
}

// Exponents in (0,1) keep the order of entries and shrink the max/min ratio.
TEST(Weighting, FractionalExponentPreservesOrderAndNarrowsGap) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> alpha_dist(0.01, 0.99);
  for (int trial = 0; trial < 300; ++trial) {
    auto p = random_probs(2 + trial % 8, rng);
    const double alpha = alpha_dist(rng);
    Vector w = weight_state_probs(p.entries(), WeightExponent::from_accuracies(alpha, 1.0));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) EXPECT_LE(w[i], w[j]);
      }
    }
    if (p.entries().minCoeff() > 0.0) {
      EXPECT_LE(w.maxCoeff() / w.minCoeff(), p.entries().maxCoeff() / p.entries().minCoeff() * (1 + 1e-12));
    }
  }
}

TEST(Weighting, UnmaskedPredictionIsProductOfArgmaxes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> acc(0.05, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto p = random_probs(2 + trial % 6, rng), q = random_probs(2 + trial % 9, rng);
    auto c = predict_composition(compose_weighted(p, q, acc(rng), acc(rng)));
    EXPECT_EQ(c, (Composition{p.argmax(), q.argmax()}));
  }
}

TEST(Mask, AllTrueLeavesScoresUnchanged) {
  auto s = compose(pv({0.6, 0.4}), pv({0.5, 0.3, 0.2}));
  EXPECT_EQ(apply_mask(s, FeasibilityMask::all_feasible(2, 3)).scores, s.scores);
}

TEST(Mask, AllFalseIsRejected) {
  EXPECT_THROW(FeasibilityMask(BoolGrid::Constant(2, 2, false), MaskProvenance::file), InputError);
  EXPECT_THROW(predict_composition(Matrix::Constant(2, 2, kInfeasibleScore)), PredictionError);
}

TEST(Mask, DimensionMismatchIsInputError) {
  auto s = compose(pv({0.6, 0.4}), pv({0.5, 0.5}));
  EXPECT_THROW(apply_mask(s, FeasibilityMask::all_feasible(2, 3)), InputError);
}

TEST(Mask, ForbiddingArgmaxPicksNextBest) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = compose(random_probs(3, rng), random_probs(4, rng));
    Composition top = predict_composition(s);
    auto masked = apply_mask(s, forbid(top.state, top.object, 3, 4));
    Composition expected{-1, -1};
    double best = -1.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        if (Composition{i, j} != top && s.scores(i, j) > best) {
          best = s.scores(i, j);
          expected = {i, j};
        }
      }
    }
    EXPECT_EQ(predict_composition(masked), expected);
  }
}

TEST(Mask, NeverRaisesOrAltersFeasibleScores) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = compose(random_probs(4, rng), random_probs(5, rng));
    BoolGrid g(4, 5);
    for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = coin(rng);
    g(0, 0) = true;
    auto m = apply_mask(s, FeasibilityMask(g, MaskProvenance::file));
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 5; ++j) {
        EXPECT_LE(m.scores(i, j), s.scores(i, j));
        if (g(i, j)) EXPECT_EQ(m.scores(i, j), s.scores(i, j));
        else EXPECT_EQ(m.scores(i, j), kInfeasibleScore);
      }
    }
  }
}

TEST(Predict, UnmaskedPicksProductOfArgmaxes) {
  EXPECT_EQ(predict_composition(compose(pv({0.6, 0.4}), pv({0.55, 0.45}))), (Composition{0, 0}));
}

TEST(Predict, MaskedUnweightedRunnerUp) {
  auto s = apply_mask(compose(pv({0.6, 0.4}), pv({0.55, 0.45})), forbid(0, 0, 2, 2));
  EXPECT_NEAR(s.scores(0, 1), 0.27, 1e-15);
  EXPECT_NEAR(s.scores(1, 0), 0.22, 1e-15);
  EXPECT_EQ(predict_composition(s), (Composition{0, 1}));
}

TEST(Predict, WeightingFlipsMaskedRunnerUp) {
  auto s = apply_mask(compose_weighted(pv({0.6, 0.4}), pv({0.55, 0.45}), 0.2, 1.0), forbid(0, 0, 2, 2));
  EXPECT_NEAR(s.scores(1, 0), 0.8325532074018731 * 0.55, 1e-15);
  EXPECT_NEAR(s.scores(0, 1), 0.9028804514474342 * 0.45, 1e-15);
  EXPECT_EQ(predict_composition(s), (Composition{1, 0}));
}

TEST(Predict, TiesGoToLowestIndices) {
  Matrix s = Matrix::Constant(3, 3, 0.1);
  s(2, 0) = 0.5;
  s(1, 2) = 0.5;
  s(1, 1) = 0.5;
  EXPECT_EQ(predict_composition(s), (Composition{1, 1}));
}

TEST(Predict, ZeroScoreIsStillFeasible) {
  Matrix s = Matrix::Constant(2, 2, kInfeasibleScore);
  s(1, 1) = 0.0;
  EXPECT_EQ(predict_composition(s), (Composition{1, 1}));
}

}  // namespace
}  // namespace sasow
