#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sasow/numerics.hpp"
#include "sasow/tape.hpp"

namespace sasow {

enum class ClassifierKind { mlp, attention };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& name);

// Dropout is only applied when training; it then needs an engine.
struct ForwardMode {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// Linear -> ReLU -> Dropout -> Linear. Weights are stored input-major (x * W).
struct MlpClassifier {
  Matrix input_weight;   // d x h
  Matrix input_bias;     // 1 x h
  Matrix output_weight;  // h x C
  Matrix output_bias;    // 1 x C
  double dropout_rate = 0.1;

  Eigen::Index input_dim() const { return input_weight.rows(); }
  Eigen::Index hidden_dim() const { return input_weight.cols(); }
  Eigen::Index class_count() const { return output_weight.cols(); }
};

// Linear, then single-head self-attention over P contiguous chunks of the
// result, residual onto the raw input features, then a linear head.
struct AttentionClassifier {
  Matrix pre_weight;   // d x d
  Matrix pre_bias;     // 1 x d
  Matrix query;        // t x t, t = d / P
  Matrix key;          // t x t
  Matrix value;        // t x t
  Matrix head_weight;  // d x C
  Matrix head_bias;    // 1 x C
  Eigen::Index patch_count = 8;
  bool scale_scores = true;

  Eigen::Index input_dim() const { return pre_weight.rows(); }
  Eigen::Index token_dim() const { return input_dim() / patch_count; }
  Eigen::Index class_count() const { return head_weight.cols(); }
};

MlpClassifier make_mlp(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index classes,
                       double dropout_rate, std::uint64_t seed);
AttentionClassifier make_attention(Eigen::Index input_dim, Eigen::Index patch_count, Eigen::Index classes,
                                   bool scale_scores, std::uint64_t seed);

// Batched forward passes: x is B x d, the result B x C logits.
Var forward(const MlpClassifier& model, Tape& tape, Var x, ForwardMode mode = {});
Var forward(const AttentionClassifier& model, Tape& tape, Var x, ForwardMode mode = {});

Vector forward_mlp(const MlpClassifier& model, const Vector& features, bool training = false,
                   std::mt19937_64* rng = nullptr);
Vector forward_attention(const AttentionClassifier& model, const Vector& features);

// Row-stochastic P x P attention score matrix for one feature vector.
Matrix attention_scores(const AttentionClassifier& model, const Vector& features);

// Parameter matrices in declaration order; this order defines the
// checkpoint blob layout.
std::vector<Matrix*> parameters(MlpClassifier& model);
std::vector<Matrix*> parameters(AttentionClassifier& model);
std::vector<const Matrix*> parameters(const MlpClassifier& model);
std::vector<const Matrix*> parameters(const AttentionClassifier& model);

/// A trained primitive classifier (state or object tower).
struct ClassifierModel {
  std::variant<MlpClassifier, AttentionClassifier> network;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;

  ClassifierKind kind() const;
  Eigen::Index input_dim() const;
  Eigen::Index class_count() const;
};

Var forward(const ClassifierModel& model, Tape& tape, Var x, ForwardMode mode = {});
std::vector<Matrix*> parameters(ClassifierModel& model);
std::vector<const Matrix*> parameters(const ClassifierModel& model);

// Inference-mode logits for a B x d batch.
Matrix logits(const ClassifierModel& model, const Matrix& batch);
// Inference-mode probabilities; rows are P_sta or P_obj per sample.
Matrix predict_probs_batch(const ClassifierModel& model, const Matrix& batch);
ProbabilityVector predict_probs(const ClassifierModel& model, const Vector& features);

}  // namespace sasow
