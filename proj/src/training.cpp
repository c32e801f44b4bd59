#include "sasow/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

namespace sasow {

using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (epochs <= 0) throw InputError("config: epochs must be positive");
  if (batch_size <= 0) throw InputError("config: batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InputError("config: learning_rate must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw InputError("config: validation_fraction must lie in (0, 0.5]");
  }
  if (patch_count < 1) throw InputError("config: patch_count must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("config: dropout must lie in [0, 1)");
  if (hidden_size < 0) throw InputError("config: hidden_size must be non-negative");
}

TrainConfig parse_train_config(const std::string& json_text) {
  TrainConfig cfg;
  try {
    const auto j = ordered_json::parse(json_text);
    if (!j.is_object()) throw InputError("config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "classifier") {
        cfg.classifier = parse_classifier_kind(value.get<std::string>());
      } else if (key == "epochs") {
        cfg.epochs = value.get<int>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<int>();
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "adam") {
          cfg.optimizer = OptimizerKind::adam;
        } else if (name == "sgd") {
          cfg.optimizer = OptimizerKind::sgd;
        } else {
          throw InputError("config: unknown optimizer '" + name + "'");
        }
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "validation_fraction") {
        cfg.validation_fraction = value.get<double>();
      } else if (key == "patch_count") {
        cfg.patch_count = value.get<Eigen::Index>();
      } else if (key == "dropout") {
        cfg.dropout = value.get<double>();
      } else if (key == "hidden_size") {
        cfg.hidden_size = value.get<Eigen::Index>();
      } else if (key == "attention.scale") {
        cfg.attention_scale = value.get<bool>();
      } else if (key == "attention" && value.is_object()) {
        cfg.attention_scale = value.at("scale").get<bool>();
      } else {
        throw InputError("config: unknown key '" + key + "'");
      }
    }
  } catch (const ordered_json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["classifier"] = to_string(cfg.classifier);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["optimizer"] = cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd";
  j["seed"] = cfg.seed;
  j["validation_fraction"] = cfg.validation_fraction;
  j["patch_count"] = cfg.patch_count;
  j["dropout"] = cfg.dropout;
  j["hidden_size"] = cfg.hidden_size;
  j["attention.scale"] = cfg.attention_scale;
  return j.dump(2);
}

double accuracy(std::span<const Eigen::Index> predicted, std::span<const Eigen::Index> labels) {
  if (predicted.empty()) throw InputError("accuracy: no samples");
  if (predicted.size() != labels.size()) throw InputError("accuracy: prediction and label counts differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<Eigen::Index> predict_classes(const ClassifierModel& model, const Matrix& batch) {
  const Matrix z = logits(model, batch);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) out[static_cast<std::size_t>(r)] = argmax(z.row(r));
  return out;
}

PrimitiveAccuracy compute_primitive_accuracy(const ClassifierModel& state_model, const ClassifierModel& object_model,
                                             const Dataset& ds, std::span<const std::size_t> rows,
                                             MeasuredOn measured_on) {
  if (rows.empty()) throw InputError("compute_primitive_accuracy: empty sample list");
  const Matrix x = ds.gather(rows);
  std::vector<Eigen::Index> states, objects;
  for (auto r : rows) {
    states.push_back(ds.samples[r].state);
    objects.push_back(ds.samples[r].object);
  }
  return {accuracy(predict_classes(state_model, x), states), accuracy(predict_classes(object_model, x), objects),
          measured_on};
}

void split_validation(const Dataset& ds, double fraction, std::uint64_t seed, std::vector<std::size_t>& fit,
                      std::vector<std::size_t>& validation) {
  std::map<Composition, std::vector<std::size_t>> groups;
  for (auto r : ds.indices(Split::train)) groups[ds.samples[r].composition()].push_back(r);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);
  fit.clear();
  validation.clear();
  for (auto& [comp, rows] : groups) {
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t n_val = 0;
    if (rows.size() >= 2) {
      n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(rows.size()) * fraction)));
      n_val = std::min(n_val, rows.size() - 1);
    }
    validation.insert(validation.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    fit.insert(fit.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(validation.begin(), validation.end());
}

namespace {

std::mt19937_64 tower_stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

// Gathers training rows; reading a test sample here is a logic error.
Matrix gather_train_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  for (auto r : rows) {
    if (ds.samples[r].split != Split::train) {
      throw std::logic_error("training attempted to read test sample " + ds.samples[r].id);
    }
  }
  return ds.gather(rows);
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const std::vector<Matrix*>& params) : cfg_(cfg) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }

  void step(const std::vector<Matrix*>& params, const Tape& tape) {
    ++t_;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix g = tape.gradient(*params[i]);
      if (cfg_.optimizer == OptimizerKind::sgd) {
        *params[i] -= lr * g;
        continue;
      }
      m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
      v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(beta1, t_);
      const double c2 = 1.0 - std::pow(beta2, t_);
      params[i]->array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<Matrix> m_, v_;
  int t_ = 0;
};

ClassifierModel init_model(const TrainConfig& cfg, Eigen::Index dim, const std::vector<std::string>& names,
                           std::uint64_t init_seed) {
  ClassifierModel model;
  const auto classes = static_cast<Eigen::Index>(names.size());
  if (cfg.classifier == ClassifierKind::mlp) {
    const Eigen::Index hidden = cfg.hidden_size > 0 ? cfg.hidden_size : 2 * dim;
    model.network = make_mlp(dim, hidden, classes, cfg.dropout, init_seed);
  } else {
    model.network = make_attention(dim, cfg.patch_count, classes, cfg.attention_scale, init_seed);
  }
  model.class_names = names;
  model.seed = init_seed;
  return model;
}

TowerHistory fit_tower(ClassifierModel& model, const Matrix& x, const std::vector<int>& labels,
                       const TrainConfig& cfg, std::mt19937_64 rng) {
  TowerHistory history;
  auto params = parameters(model);
  Optimizer opt(cfg, params);
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      Matrix batch(static_cast<Eigen::Index>(end - start), x.cols());
      std::vector<int> batch_labels;
      for (std::size_t k = start; k < end; ++k) {
        batch.row(static_cast<Eigen::Index>(k - start)) = x.row(static_cast<Eigen::Index>(order[k]));
        batch_labels.push_back(labels[order[k]]);
      }
      Tape tape;
      Var z = forward(model, tape, tape.constant(std::move(batch)), ForwardMode{true, &rng});
      Var loss = softmax_cross_entropy(z, batch_labels);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      total += value * static_cast<double>(end - start);
      tape.backward(loss);
      opt.step(params, tape);
    }
    history.epoch_loss.push_back(total / static_cast<double>(n));
  }
  for (const Matrix* p : params) {
    if (!all_finite(*p)) throw NumericError("training diverged: non-finite parameters");
  }
  std::vector<Eigen::Index> truth(labels.begin(), labels.end());
  history.train_accuracy = accuracy(predict_classes(model, x), truth);
  return history;
}

}  // namespace

TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.indices(Split::train).empty()) throw InputError("train: dataset has no train samples");
  if (cfg.classifier == ClassifierKind::attention && ds.dim() % cfg.patch_count != 0) {
    throw InputError("train: feature dimension " + std::to_string(ds.dim()) + " is not divisible by " +
                     std::to_string(cfg.patch_count) + " patches");
  }

  TrainResult result;
  split_validation(ds, cfg.validation_fraction, cfg.seed, result.fit_rows, result.validation_rows);
  if (result.validation_rows.empty()) throw InputError("train: validation split is empty");
  if (result.fit_rows.empty()) throw InputError("train: no samples left to fit");

  const Matrix x = gather_train_rows(ds, result.fit_rows);
  std::vector<int> state_labels, object_labels;
  for (auto r : result.fit_rows) {
    state_labels.push_back(static_cast<int>(ds.samples[r].state));
    object_labels.push_back(static_cast<int>(ds.samples[r].object));
  }

  const std::string fp = fingerprint(ds);
  result.state_model = init_model(cfg, ds.dim(), ds.vocab.states(), tower_stream(cfg.seed, 11)());
  result.object_model = init_model(cfg, ds.dim(), ds.vocab.objects(), tower_stream(cfg.seed, 12)());
  result.state_model.dataset_fingerprint = fp;
  result.object_model.dataset_fingerprint = fp;

  // The towers share nothing, so they can train concurrently.
  auto state_job = std::async(std::launch::async, [&] {
    return fit_tower(result.state_model, x, state_labels, cfg, tower_stream(cfg.seed, 21));
  });
  result.object_history = fit_tower(result.object_model, x, object_labels, cfg, tower_stream(cfg.seed, 22));
  result.state_history = state_job.get();

  const Matrix xv = gather_train_rows(ds, result.validation_rows);
  std::vector<Eigen::Index> vs, vo;
  for (auto r : result.validation_rows) {
    vs.push_back(ds.samples[r].state);
    vo.push_back(ds.samples[r].object);
  }
  result.accuracy = {accuracy(predict_classes(result.state_model, xv), vs),
                     accuracy(predict_classes(result.object_model, xv), vo), MeasuredOn::validation};
  return result;
}

}  // namespace sasow
