#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sasow/classifiers.hpp"
#include "sasow/data.hpp"

namespace sasow {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  ClassifierKind classifier = ClassifierKind::mlp;
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  Eigen::Index patch_count = 8;
  double dropout = 0.1;
  Eigen::Index hidden_size = 0;  // 0 means twice the feature dimension
  bool attention_scale = true;

  void validate() const;
};

// Flat JSON object with the TrainConfig field names; `attention.scale` may be
// given flat or nested. Unknown keys are rejected.
TrainConfig parse_train_config(const std::string& json_text);
std::string to_json(const TrainConfig& cfg);

enum class MeasuredOn { validation, test };

struct PrimitiveAccuracy {
  double a_sta = 0.0;
  double a_obj = 0.0;
  MeasuredOn measured_on = MeasuredOn::validation;
};

double accuracy(std::span<const Eigen::Index> predicted, std::span<const Eigen::Index> labels);

PrimitiveAccuracy compute_primitive_accuracy(const ClassifierModel& state_model, const ClassifierModel& object_model,
                                             const Dataset& ds, std::span<const std::size_t> rows,
                                             MeasuredOn measured_on);

// Argmax class per row of an inference pass.
std::vector<Eigen::Index> predict_classes(const ClassifierModel& model, const Matrix& batch);

struct TowerHistory {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

struct TrainResult {
  ClassifierModel state_model;
  ClassifierModel object_model;
  PrimitiveAccuracy accuracy;  // on the validation carve-out
  TowerHistory state_history;
  TowerHistory object_history;
  std::vector<std::size_t> fit_rows;
  std::vector<std::size_t> validation_rows;
};

// Stratified by composition: each train composition with n >= 2 samples
// gives max(1, round(n * fraction)) of them (at most n - 1) to validation.
void split_validation(const Dataset& ds, double fraction, std::uint64_t seed, std::vector<std::size_t>& fit,
                      std::vector<std::size_t>& validation);

/// Trains the state and object towers independently with softmax
/// cross-entropy. Only train-split samples are read. Deterministic for a
/// fixed config.
TrainResult train(const Dataset& ds, const TrainConfig& cfg);

}  // namespace sasow
