#include "sasow/tape.hpp"

#include <string>

namespace sasow {

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw InputError("operands recorded on different tapes");
  return *a.tape;
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw InputError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::parameter(const Matrix& param) {
  Var v = record(param, nullptr);
  params_[&param] = v.id;
  return v;
}

Var Tape::record(Matrix value, Backward backward) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward)});
  return Var{this, nodes_.size() - 1};
}

Matrix& Tape::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::gradient(const Matrix& param) const {
  auto it = params_.find(&param);
  if (it == params_.end() || nodes_[it->second].grad.size() == 0) {
    return Matrix::Zero(param.rows(), param.cols());
  }
  return nodes_[it->second].grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InputError("backward: variable belongs to another tape");
  if (value(loss).size() != 1) throw InputError("backward: loss must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_accumulator(loss.id).setOnes();
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_shape(a.cols() == b.rows(), "matmul", a.value(), b.value());
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.grad_accumulator(a.id).noalias() += g * t.value(b.id).transpose();
    t.grad_accumulator(b.id).noalias() += t.value(a.id).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value());
  return t.record(a.value() + b.value(), [a, b](Tape& t, std::size_t self) {
    t.grad_accumulator(a.id) += t.grad(self);
    t.grad_accumulator(b.id) += t.grad(self);
  });
}

Var add_row(Var x, Var bias) {
  Tape& t = same_tape(x, bias);
  require_shape(bias.rows() == 1 && bias.cols() == x.cols(), "add_row", x.value(), bias.value());
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return t.record(std::move(out), [x, bias](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.grad_accumulator(x.id) += g;
    t.grad_accumulator(bias.id) += g.colwise().sum();
  });
}

Var scale(Var x, double factor) {
  Tape& t = *x.tape;
  return t.record(x.value() * factor, [x, factor](Tape& t, std::size_t self) {
    t.grad_accumulator(x.id) += t.grad(self) * factor;
  });
}

Var relu(Var x) {
  Tape& t = *x.tape;
  return t.record(x.value().cwiseMax(0.0), [x](Tape& t, std::size_t self) {
    const Matrix& in = t.value(x.id);
    t.grad_accumulator(x.id) += (in.array() > 0.0).select(t.grad(self), 0.0).matrix();
  });
}

Var dropout(Var x, const Matrix& mask) {
  Tape& t = *x.tape;
  require_shape(mask.rows() == x.rows() && mask.cols() == x.cols(), "dropout", x.value(), mask);
  return t.record(x.value().cwiseProduct(mask), [x, mask](Tape& t, std::size_t self) {
    t.grad_accumulator(x.id) += t.grad(self).cwiseProduct(mask);
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = *x.tape;
  if (rows * cols != x.value().size()) {
    throw InputError("reshape: " + std::to_string(x.value().size()) + " entries into " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  const Eigen::Index in_rows = x.rows();
  const Eigen::Index in_cols = x.cols();
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return t.record(std::move(out), [x, in_rows, in_cols](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.grad_accumulator(x.id) += Eigen::Map<const Matrix>(g.data(), in_rows, in_cols);
  });
}

Var block_scores(Var q, Var k, Eigen::Index tokens) {
  Tape& t = same_tape(q, k);
  require_shape(q.rows() == k.rows() && q.cols() == k.cols() && tokens > 0 && q.rows() % tokens == 0,
                "block_scores", q.value(), k.value());
  const Eigen::Index blocks = q.rows() / tokens;
  Matrix out(q.rows(), tokens);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.middleRows(b * tokens, tokens).noalias() =
        q.value().middleRows(b * tokens, tokens) * k.value().middleRows(b * tokens, tokens).transpose();
  }
  return t.record(std::move(out), [q, k, tokens, blocks](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gq = t.grad_accumulator(q.id);
    Matrix& gk = t.grad_accumulator(k.id);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      auto gb = g.middleRows(b * tokens, tokens);
      gq.middleRows(b * tokens, tokens).noalias() += gb * t.value(k.id).middleRows(b * tokens, tokens);
      gk.middleRows(b * tokens, tokens).noalias() +=
          gb.transpose() * t.value(q.id).middleRows(b * tokens, tokens);
    }
  });
}

Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  Matrix out = softmax_rows(x.value());
  return t.record(std::move(out), [x](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    // dx = y .* (g - rowsum(g .* y))
    Vector inner = g.cwiseProduct(y).rowwise().sum();
    Matrix dx = y.array() * (g.colwise() - inner).array();
    t.grad_accumulator(x.id) += dx;
  });
}

Var block_mix(Var a, Var v, Eigen::Index tokens) {
  Tape& t = same_tape(a, v);
  require_shape(a.rows() == v.rows() && a.cols() == tokens && tokens > 0 && a.rows() % tokens == 0,
                "block_mix", a.value(), v.value());
  const Eigen::Index blocks = a.rows() / tokens;
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.middleRows(b * tokens, tokens).noalias() =
        a.value().middleRows(b * tokens, tokens) * v.value().middleRows(b * tokens, tokens);
  }
  return t.record(std::move(out), [a, v, tokens, blocks](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_accumulator(a.id);
    Matrix& gv = t.grad_accumulator(v.id);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      auto gb = g.middleRows(b * tokens, tokens);
      ga.middleRows(b * tokens, tokens).noalias() +=
          gb * t.value(v.id).middleRows(b * tokens, tokens).transpose();
      gv.middleRows(b * tokens, tokens).noalias() +=
          t.value(a.id).middleRows(b * tokens, tokens).transpose() * gb;
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = *logits.tape;
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows() || z.rows() == 0) {
    throw InputError("softmax_cross_entropy: one label per logits row required");
  }
  Matrix probs = softmax_rows(z);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) throw InputError("softmax_cross_entropy: label out of range");
    loss -= std::log(std::max(probs(r, y), kCrossEntropyClamp));
  }
  const double n = static_cast<double>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  std::vector<int> owned(labels.begin(), labels.end());
  return t.record(std::move(out), [logits, probs = std::move(probs), owned = std::move(owned), n](
                                      Tape& t, std::size_t self) {
    Matrix d = probs;
    for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, owned[static_cast<std::size_t>(r)]) -= 1.0;
    t.grad_accumulator(logits.id) += d * (t.grad(self)(0, 0) / n);
  });
}

Var sum(Var x) {
  Tape& t = *x.tape;
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.record(std::move(out), [x](Tape& t, std::size_t self) {
    t.grad_accumulator(x.id).array() += t.grad(self)(0, 0);
  });
}

Var weighted_sum(Var x, const Matrix& weights) {
  Tape& t = *x.tape;
  require_shape(weights.rows() == x.rows() && weights.cols() == x.cols(), "weighted_sum", x.value(),
                weights);
  Matrix out(1, 1);
  out(0, 0) = x.value().cwiseProduct(weights).sum();
  return t.record(std::move(out), [x, weights](Tape& t, std::size_t self) {
    t.grad_accumulator(x.id) += weights * t.grad(self)(0, 0);
  });
}

}  // namespace sasow
