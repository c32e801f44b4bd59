#include "sasow/classifiers.hpp"

#include <cmath>

namespace sasow {

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::mlp ? "mlp" : "attention"; }

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "mlp") return ClassifierKind::mlp;
  if (name == "attention") return ClassifierKind::attention;
  throw InputError("unknown classifier kind '" + name + "'");
}

namespace {

Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

void require_input(Eigen::Index expected, Var x) {
  if (x.cols() != expected) {
    throw InputError("feature length " + std::to_string(x.cols()) + " does not match classifier input " +
                     std::to_string(expected));
  }
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  Matrix mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < keep ? 1.0 / keep : 0.0;
  return mask;
}

Matrix as_row(const Vector& v) { return v.transpose(); }

}  // namespace

MlpClassifier make_mlp(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index classes,
                       double dropout_rate, std::uint64_t seed) {
  if (input_dim <= 0 || hidden_dim <= 0 || classes <= 0) throw InputError("mlp dimensions must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw InputError("dropout rate must lie in [0,1)");
  std::mt19937_64 rng(seed);
  MlpClassifier m;
  m.input_weight = glorot(input_dim, hidden_dim, rng);
  m.input_bias = Matrix::Zero(1, hidden_dim);
  m.output_weight = glorot(hidden_dim, classes, rng);
  m.output_bias = Matrix::Zero(1, classes);
  m.dropout_rate = dropout_rate;
  return m;
}

AttentionClassifier make_attention(Eigen::Index input_dim, Eigen::Index patch_count, Eigen::Index classes,
                                   bool scale_scores, std::uint64_t seed) {
  if (input_dim <= 0 || classes <= 0) throw InputError("attention dimensions must be positive");
  if (patch_count < 1 || input_dim % patch_count != 0) {
    throw InputError("feature dimension " + std::to_string(input_dim) + " is not divisible by " +
                     std::to_string(patch_count) + " patches");
  }
  const Eigen::Index t = input_dim / patch_count;
  std::mt19937_64 rng(seed);
  AttentionClassifier m;
  m.pre_weight = glorot(input_dim, input_dim, rng);
  m.pre_bias = Matrix::Zero(1, input_dim);
  m.query = glorot(t, t, rng);
  m.key = glorot(t, t, rng);
  m.value = glorot(t, t, rng);
  m.head_weight = glorot(input_dim, classes, rng);
  m.head_bias = Matrix::Zero(1, classes);
  m.patch_count = patch_count;
  m.scale_scores = scale_scores;
  return m;
}

Var forward(const MlpClassifier& m, Tape& tape, Var x, ForwardMode mode) {
  require_input(m.input_dim(), x);
  Var h = relu(add_row(matmul(x, tape.parameter(m.input_weight)), tape.parameter(m.input_bias)));
  if (mode.training && m.dropout_rate > 0.0) {
    if (mode.rng == nullptr) throw InputError("training-mode dropout needs a random engine");
    h = dropout(h, dropout_mask(h.rows(), h.cols(), m.dropout_rate, *mode.rng));
  }
  return add_row(matmul(h, tape.parameter(m.output_weight)), tape.parameter(m.output_bias));
}

namespace {

// Shared by forward and attention_scores so both see the same A.
struct AttentionTrace {
  Var scores;
  Var logits;
};

AttentionTrace trace_attention(const AttentionClassifier& m, Tape& tape, Var x) {
  require_input(m.input_dim(), x);
  if (m.patch_count < 1 || m.input_dim() % m.patch_count != 0) {
    throw InputError("feature dimension is not divisible by the patch count");
  }
  const Eigen::Index batch = x.rows();
  const Eigen::Index p = m.patch_count;
  const Eigen::Index t = m.token_dim();

  Var g = add_row(matmul(x, tape.parameter(m.pre_weight)), tape.parameter(m.pre_bias));
  Var tokens = reshape(g, batch * p, t);
  Var q = matmul(tokens, tape.parameter(m.query));
  Var k = matmul(tokens, tape.parameter(m.key));
  Var v = matmul(tokens, tape.parameter(m.value));
  Var s = block_scores(q, k, p);
  if (m.scale_scores) s = scale(s, 1.0 / std::sqrt(static_cast<double>(t)));
  Var a = softmax_rows(s);
  Var w = reshape(block_mix(a, v, p), batch, p * t);
  Var features = add(x, w);
  Var out = add_row(matmul(features, tape.parameter(m.head_weight)), tape.parameter(m.head_bias));
  return {a, out};
}

}  // namespace

Var forward(const AttentionClassifier& m, Tape& tape, Var x, ForwardMode) {
  return trace_attention(m, tape, x).logits;
}

Vector forward_mlp(const MlpClassifier& model, const Vector& features, bool training, std::mt19937_64* rng) {
  Tape tape;
  Var out = forward(model, tape, tape.constant(as_row(features)), ForwardMode{training, rng});
  return out.value().row(0).transpose();
}

Vector forward_attention(const AttentionClassifier& model, const Vector& features) {
  Tape tape;
  Var out = forward(model, tape, tape.constant(as_row(features)));
  return out.value().row(0).transpose();
}

Matrix attention_scores(const AttentionClassifier& model, const Vector& features) {
  Tape tape;
  return trace_attention(model, tape, tape.constant(as_row(features))).scores.value();
}

std::vector<Matrix*> parameters(MlpClassifier& m) {
  return {&m.input_weight, &m.input_bias, &m.output_weight, &m.output_bias};
}

std::vector<Matrix*> parameters(AttentionClassifier& m) {
  return {&m.pre_weight, &m.pre_bias, &m.query, &m.key, &m.value, &m.head_weight, &m.head_bias};
}

std::vector<const Matrix*> parameters(const MlpClassifier& m) {
  return {&m.input_weight, &m.input_bias, &m.output_weight, &m.output_bias};
}

std::vector<const Matrix*> parameters(const AttentionClassifier& m) {
  return {&m.pre_weight, &m.pre_bias, &m.query, &m.key, &m.value, &m.head_weight, &m.head_bias};
}

ClassifierKind ClassifierModel::kind() const {
  return std::holds_alternative<MlpClassifier>(network) ? ClassifierKind::mlp : ClassifierKind::attention;
}

Eigen::Index ClassifierModel::input_dim() const {
  return std::visit([](const auto& n) { return n.input_dim(); }, network);
}

Eigen::Index ClassifierModel::class_count() const {
  return std::visit([](const auto& n) { return n.class_count(); }, network);
}

Var forward(const ClassifierModel& model, Tape& tape, Var x, ForwardMode mode) {
  return std::visit([&](const auto& n) { return forward(n, tape, x, mode); }, model.network);
}

std::vector<Matrix*> parameters(ClassifierModel& model) {
  return std::visit([](auto& n) { return parameters(n); }, model.network);
}

std::vector<const Matrix*> parameters(const ClassifierModel& model) {
  return std::visit([](const auto& n) { return parameters(n); }, model.network);
}

Matrix logits(const ClassifierModel& model, const Matrix& batch) {
  Tape tape;
  return forward(model, tape, tape.constant(batch)).value();
}

Matrix predict_probs_batch(const ClassifierModel& model, const Matrix& batch) {
  return softmax_rows(logits(model, batch));
}

ProbabilityVector predict_probs(const ClassifierModel& model, const Vector& features) {
  return softmax(logits(model, as_row(features)).row(0).transpose());
}

}  // namespace sasow
