#include <limits>

#include <gtest/gtest.h>

#include "sasow/checkpoint.hpp"
#include "sasow/training.hpp"

namespace sasow {
namespace {

SyntheticOptions separable_options() {
  SyntheticOptions o;
  o.states = 4;
  o.objects = 5;
  o.dim = 16;
  o.images_per_comp = 10;
  o.seen_fraction = 0.6;
  o.noise_sigma = 0.0;
  o.patch_count = 4;
  o.seed = 2;
  return o;
}

TrainConfig quick_config(ClassifierKind kind) {
  TrainConfig cfg;
  cfg.classifier = kind;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-2;
  cfg.patch_count = 4;
  cfg.seed = 3;
  return cfg;
}

// Two classes on a 2-d feature; logits equal the features.
ClassifierModel passthrough_model() {
  MlpClassifier m = make_mlp(2, 2, 2, 0.0, 0);
  m.input_weight = Matrix::Identity(2, 2);
  m.input_bias.setZero();
  m.output_weight = Matrix::Identity(2, 2);
  m.output_bias.setZero();
  return {m, {"c0", "c1"}, 0, ""};
}

Dataset four_samples(std::vector<Eigen::Index> states, std::vector<Eigen::Index> objects) {
  Dataset ds;
  ds.vocab = Vocabulary({"s0", "s1"}, {"o0", "o1"});
  ds.features.resize(4, 2);
  ds.features << 1, 0, 0, 1, 1, 0, 0, 1;  // predictions 0, 1, 0, 1
  for (std::size_t i = 0; i < 4; ++i) {
    ds.samples.push_back({"x" + std::to_string(i), states[i], objects[i], Split::test});
  }
  return ds;
}

TEST(Accuracy, Counting) {
  const std::vector<Eigen::Index> pred{0, 1, 2, 1}, truth{0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(accuracy(pred, truth), 0.75);
  EXPECT_THROW(accuracy(std::vector<Eigen::Index>{}, std::vector<Eigen::Index>{}), InputError);
}

TEST(Accuracy, PrimitiveCountingOracle) {
  auto ds = four_samples({0, 1, 0, 0}, {0, 0, 1, 1});
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  auto m = passthrough_model();
  auto acc = compute_primitive_accuracy(m, m, ds, rows, MeasuredOn::test);
  EXPECT_DOUBLE_EQ(acc.a_sta, 0.75);
  EXPECT_DOUBLE_EQ(acc.a_obj, 0.5);
  EXPECT_EQ(acc.measured_on, MeasuredOn::test);
}

TEST(Accuracy, PerfectAndConstantPredictors) {
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  auto m = passthrough_model();
  auto perfect = compute_primitive_accuracy(m, m, four_samples({0, 1, 0, 1}, {0, 1, 0, 1}), rows,
                                            MeasuredOn::validation);
  EXPECT_DOUBLE_EQ(perfect.a_sta, 1.0);
  EXPECT_DOUBLE_EQ(perfect.a_obj, 1.0);

  auto constant = passthrough_model();
  auto& net = std::get<MlpClassifier>(constant.network);
  net.output_weight.setZero();
  net.output_bias << 1.0, 0.0;
  auto half = compute_primitive_accuracy(constant, constant, four_samples({0, 1, 0, 1}, {1, 1, 0, 0}), rows,
                                         MeasuredOn::validation);
  EXPECT_DOUBLE_EQ(half.a_sta, 0.5);
  EXPECT_DOUBLE_EQ(half.a_obj, 0.5);
  EXPECT_THROW(compute_primitive_accuracy(m, m, four_samples({0, 1, 0, 1}, {0, 1, 0, 1}), {}, MeasuredOn::test),
               InputError);
}

TEST(Config, ParseAndValidate) {
  auto cfg = parse_train_config(R"({"classifier":"attention","epochs":5,"attention":{"scale":false}})");
  EXPECT_EQ(cfg.classifier, ClassifierKind::attention);
  EXPECT_EQ(cfg.epochs, 5);
  EXPECT_FALSE(cfg.attention_scale);
  EXPECT_EQ(parse_train_config(to_json(cfg)).epochs, 5);
  EXPECT_THROW(parse_train_config(R"({"epoch":5})"), InputError);
  EXPECT_THROW(parse_train_config(R"({"validation_fraction":0.6})"), InputError);
  EXPECT_THROW(parse_train_config(R"({"learning_rate":0})"), InputError);
  EXPECT_THROW(parse_train_config("not json"), InputError);
}

TEST(Validation, StratifiedAndDisjoint) {
  auto ds = generate_synthetic(separable_options());
  std::vector<std::size_t> fit, val;
  split_validation(ds, 0.1, 4, fit, val);
  std::map<Composition, int> per_comp;
  for (auto r : val) {
    EXPECT_EQ(ds.samples[r].split, Split::train);
    ++per_comp[ds.samples[r].composition()];
  }
  EXPECT_EQ(per_comp.size(), ds.split.seen.size());
  for (const auto& [c, n] : per_comp) EXPECT_EQ(n, 1);
  EXPECT_EQ(fit.size() + val.size(), ds.indices(Split::train).size());
}

TEST(Train, DeterministicCheckpoints) {
  auto ds = generate_synthetic(separable_options());
  for (auto kind : {ClassifierKind::mlp, ClassifierKind::attention}) {
    auto a = train(ds, quick_config(kind));
    auto b = train(ds, quick_config(kind));
    EXPECT_EQ(encode_parameters(a.state_model), encode_parameters(b.state_model));
    EXPECT_EQ(encode_parameters(a.object_model), encode_parameters(b.object_model));
    EXPECT_EQ(a.accuracy.a_sta, b.accuracy.a_sta);
    EXPECT_EQ(a.accuracy.a_obj, b.accuracy.a_obj);
  }
}

TEST(Train, SeparableDataIsFitPerfectlyAndLossDescends) {
  auto ds = generate_synthetic(separable_options());
  for (auto kind : {ClassifierKind::mlp, ClassifierKind::attention}) {
    auto r = train(ds, quick_config(kind));
    EXPECT_DOUBLE_EQ(r.state_history.train_accuracy, 1.0) << to_string(kind);
    EXPECT_DOUBLE_EQ(r.object_history.train_accuracy, 1.0) << to_string(kind);
    EXPECT_LT(r.state_history.epoch_loss.back(), r.state_history.epoch_loss.front());
    EXPECT_LT(r.object_history.epoch_loss.back(), r.object_history.epoch_loss.front());
    for (double l : r.state_history.epoch_loss) EXPECT_TRUE(std::isfinite(l));
    EXPECT_EQ(r.accuracy.measured_on, MeasuredOn::validation);
    EXPECT_GT(r.accuracy.a_sta, 0.0);
    EXPECT_GT(r.accuracy.a_obj, 0.0);
  }
}

TEST(Train, SgdAlsoDescends) {
  auto ds = generate_synthetic(separable_options());
  auto cfg = quick_config(ClassifierKind::mlp);
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 0.1;
  auto r = train(ds, cfg);
  EXPECT_LT(r.state_history.epoch_loss.back(), r.state_history.epoch_loss.front());
}

// Poisoning every test feature with NaN must leave training unaffected.
TEST(Train, NeverReadsTestSamples) {
  auto ds = generate_synthetic(separable_options());
  auto poisoned = ds;
  for (auto r : ds.indices(Split::test)) {
    poisoned.features.row(static_cast<Eigen::Index>(r)).setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  auto cfg = quick_config(ClassifierKind::attention);
  cfg.epochs = 3;
  auto clean = train(ds, cfg);
  auto dirty = train(poisoned, cfg);
  EXPECT_EQ(encode_parameters(clean.state_model), encode_parameters(dirty.state_model));
  EXPECT_EQ(encode_parameters(clean.object_model), encode_parameters(dirty.object_model));
}

TEST(Train, DivergenceIsNumericError) {
  auto ds = generate_synthetic(separable_options());
  auto cfg = quick_config(ClassifierKind::mlp);
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e300;
  EXPECT_THROW(train(ds, cfg), NumericError);
}

TEST(Train, EmptyTrainSplitIsInputError) {
  auto ds = generate_synthetic(separable_options());
  for (auto& s : ds.samples) s.split = Split::test;
  EXPECT_THROW(train(ds, quick_config(ClassifierKind::mlp)), InputError);
}

}  // namespace
}  // namespace sasow
