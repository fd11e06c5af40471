#include "hetrel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hetrel/error.hpp"

namespace hetrel {

namespace {

std::string shape(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

Tape& same_tape(const Tensor& a, const Tensor& b) {
  if (!a.valid() || a.tape() != b.tape()) throw ShapeError("tensors belong to different tapes");
  return *a.tape();
}

double sigmoid_scalar(double x) {
  // Split by sign so exp() never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Row-major fill keeps the draw order independent of Eigen's storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Tensor / Tape

const Matrix& Tensor::value() const {
  if (!tape_) throw ShapeError("use of an empty tensor handle");
  return tape_->node(*this).value;
}

const Matrix& Tensor::grad() const {
  if (!tape_) throw ShapeError("use of an empty tensor handle");
  return tape_->node(*this).grad;
}

bool Tensor::requires_grad() const { return tape_ && tape_->node(*this).requires_grad; }

double Tensor::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("item() on a non-scalar tensor " + shape(v));
  return v(0, 0);
}

const Tape::Node& Tape::node(const Tensor& t) const {
  if (t.tape_ != this || t.slot_ >= nodes_.size()) throw ShapeError("tensor does not belong to this tape");
  return nodes_[t.slot_];
}

Tensor Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(Matrix value) { return push({std::move(value), {}, false, {}, nullptr}); }

Tensor Tape::variable(Matrix value) { return push({std::move(value), {}, true, {}, nullptr}); }

Tensor Tape::parameter(Parameter& p) { return push({p.value, {}, true, {}, &p}); }

Tensor Tape::record(Matrix value, std::initializer_list<Tensor> inputs, Backward backward) {
  return record(std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(backward));
}

Tensor Tape::record(Matrix value, std::span<const Tensor> inputs, Backward backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  Node n{std::move(value), {}, needs, {}, nullptr};
  if (needs) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(const Tensor& t, const Matrix& contribution) {
  if (t.tape_ != this) throw ShapeError("gradient routed to a foreign tape");
  auto& n = nodes_[t.slot_];
  if (!n.requires_grad) return;
  if (contribution.rows() != n.value.rows() || contribution.cols() != n.value.cols())
    shape_error("accumulate", n.value, contribution);
  if (n.grad.size() == 0)
    n.grad = contribution;
  else
    n.grad += contribution;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ShapeError("backward() on a tape that was already swept; call reset()");
  const auto& root = node(loss);
  if (root.value.size() != 1) throw ShapeError("backward() needs a 1x1 loss, got " + shape(root.value));
  consumed_ = true;
  if (!root.requires_grad) return;
  nodes_[loss.slot_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.slot_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.parameter) n.parameter->grad += n.grad;
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto& tape = same_tape(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  return tape.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  auto& tape = same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return tape.record(av + bv, {a, b}, [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    Matrix out = av.rowwise() + bv.row(0);
    return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      if (b.requires_grad()) t.accumulate(b, g.colwise().sum());
    });
  }
  if (bv.cols() == 1 && bv.rows() == av.rows()) {
    Matrix out = av.colwise() + bv.col(0);
    return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      if (b.requires_grad()) t.accumulate(b, g.rowwise().sum());
    });
  }
  shape_error("add", av, bv);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto& tape = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a.value(), b.value());
  return tape.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, -g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto& tape = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a.value(), b.value());
  return tape.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Tensor scale(const Tensor& a, double factor) {
  return a.tape()->record(a.value() * factor, {a}, [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Tensor add_scalar(const Tensor& a, double value) {
  Matrix out = a.value().array() + value;
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Tensor scalar_mul(const Tensor& s, const Tensor& x) {
  auto& tape = same_tape(s, x);
  if (s.value().size() != 1) shape_error("scalar_mul", s.value(), x.value());
  return tape.record(s.item() * x.value(), {s, x}, [s, x](Tape& t, const Matrix& g) {
    if (s.requires_grad()) t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(x.value()).sum()));
    if (x.requires_grad()) t.accumulate(x, g * s.item());
  });
}

Tensor row_scale(const Tensor& x, const Tensor& s) {
  auto& tape = same_tape(x, s);
  if (s.cols() != 1 || s.rows() != x.rows()) shape_error("row_scale", x.value(), s.value());
  Matrix out = s.value().col(0).asDiagonal() * x.value();
  return tape.record(std::move(out), {x, s}, [x, s](Tape& t, const Matrix& g) {
    if (x.requires_grad()) t.accumulate(x, s.value().col(0).asDiagonal() * g);
    if (s.requires_grad()) t.accumulate(s, g.cwiseProduct(x.value()).rowwise().sum());
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  auto& tape = *parts.front().tape();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != parts.front().rows()) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(parts.front().rows(), cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (const auto& p : inputs) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_col(const Tensor& x, Eigen::Index col) {
  if (col < 0 || col >= x.cols()) throw ShapeError("slice_col: column " + std::to_string(col) + " out of " + shape(x.value()));
  return x.tape()->record(x.value().col(col), {x}, [x, col](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    full.col(col) = g.col(0);
    t.accumulate(x, full);
  });
}

Tensor transpose(const Tensor& x) {
  return x.tape()->record(x.value().transpose(), {x}, [x](Tape& t, const Matrix& g) { t.accumulate(x, g.transpose()); });
}

Tensor sigmoid(const Tensor& x) {
  Matrix out = x.value().unaryExpr(&sigmoid_scalar);
  return x.tape()->record(out, {x}, [x, out](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix())));
  });
}

Tensor tanh(const Tensor& x) {
  Matrix out = x.value().array().tanh().matrix();
  return x.tape()->record(out, {x}, [x, out](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

Tensor relu(const Tensor& x) {
  return x.tape()->record(x.value().cwiseMax(0.0), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, (x.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Tensor log(const Tensor& x) {
  if ((x.value().array() <= 0.0).any()) throw NumericError("log of a non-positive value");
  return x.tape()->record(x.value().array().log().matrix(), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseQuotient(x.value()));
  });
}

Tensor log_sigmoid(const Tensor& x) {
  // log sigmoid(x) = min(x, 0) - log1p(exp(-|x|))
  Matrix out = x.value().unaryExpr([](double v) { return std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v))); });
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    // d/dx log sigmoid(x) = sigmoid(-x)
    t.accumulate(x, g.cwiseProduct(x.value().unaryExpr([](double v) { return sigmoid_scalar(-v); })));
  });
}

Tensor row_softmax(const Tensor& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.value().row(i);
    Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp();
    out.row(i) = e / e.sum();
  }
  return x.tape()->record(out, {x}, [x, out](Tape& t, const Matrix& g) {
    // dx = y .* (g - <g, y>) per row
    Eigen::VectorXd dots = g.cwiseProduct(out).rowwise().sum();
    t.accumulate(x, out.cwiseProduct((g.colwise() - dots)));
  });
}

Tensor masked_mean_rows(const Tensor& x, std::span<const double> weights) {
  if (static_cast<Eigen::Index>(weights.size()) != x.rows())
    throw ShapeError("masked_mean_rows: " + std::to_string(weights.size()) + " weights for " + shape(x.value()));
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const double total = w.sum();
  if (!(total > 0.0)) throw ShapeError("masked_mean_rows: weights sum to zero");
  w /= total;
  Matrix out = w.transpose() * x.value();
  return x.tape()->record(std::move(out), {x}, [x, w](Tape& t, const Matrix& g) { t.accumulate(x, w * g); });
}

Tensor inner_product(const Tensor& a, const Tensor& b) {
  auto& tape = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("inner_product", a.value(), b.value());
  return tape.record(Matrix::Constant(1, 1, a.value().cwiseProduct(b.value()).sum()), {a, b},
                     [a, b](Tape& t, const Matrix& g) {
                       if (a.requires_grad()) t.accumulate(a, b.value() * g(0, 0));
                       if (b.requires_grad()) t.accumulate(b, a.value() * g(0, 0));
                     });
}

Tensor sum(const Tensor& x) {
  return x.tape()->record(Matrix::Constant(1, 1, x.value().sum()), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  if (x.value().size() == 0) throw ShapeError("mean of an empty tensor");
  const double n = static_cast<double>(x.value().size());
  return x.tape()->record(Matrix::Constant(1, 1, x.value().sum() / n), {x}, [x, n](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Tensor row_sum(const Tensor& x) {
  return x.tape()->record(x.value().rowwise().sum(), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, g.col(0).replicate(1, x.cols()));
  });
}

Tensor weighted_logsumexp_rows(const Tensor& x, const Matrix& weights) {
  if (weights.rows() != x.rows() || weights.cols() != x.cols())
    shape_error("weighted_logsumexp_rows", x.value(), weights);
  if ((weights.array() < 0.0).any()) throw ShapeError("weighted_logsumexp_rows: negative weight");
  Matrix out(x.rows(), 1);
  Matrix share = Matrix::Zero(x.rows(), x.cols());  // d out_i / d x_ij
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (weights(i, j) > 0.0) peak = std::max(peak, x.value()(i, j));
    if (!std::isfinite(peak)) throw ShapeError("weighted_logsumexp_rows: row " + std::to_string(i) + " has no weight");
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (weights(i, j) == 0.0) continue;
      share(i, j) = weights(i, j) * std::exp(x.value()(i, j) - peak);
      total += share(i, j);
    }
    share.row(i) /= total;
    out(i, 0) = peak + std::log(total);
  }
  return x.tape()->record(std::move(out), {x}, [x, share](Tape& t, const Matrix& g) {
    t.accumulate(x, g.col(0).asDiagonal() * share);
  });
}

Tensor gather_rows(const Tensor& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of " + shape(x.value()));
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(rows[i]);
  }
  std::vector<Eigen::Index> index(rows.begin(), rows.end());
  return x.tape()->record(std::move(out), {x}, [x, index](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < index.size(); ++i) full.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(x, full);
  });
}

Tensor spmm(const SparseMatrix& a, const Tensor& x) {
  if (a.cols() != x.rows())
    throw ShapeError("spmm: shape mismatch (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ") vs " +
                     shape(x.value()));
  // The closure keeps its own handle on the matrix; callers may reuse theirs.
  auto held = std::make_shared<const SparseMatrix>(a);
  Matrix out = *held * x.value();
  return x.tape()->record(std::move(out), {x}, [x, held](Tape& t, const Matrix& g) {
    t.accumulate(x, held->transpose() * g);
  });
}

// ---------------------------------------------------------------------------
// GRU

GruCell::GruCell(const std::string& prefix, Eigen::Index dim, std::mt19937_64& rng)
    : w_z(prefix + ".w_z", xavier_uniform(2 * dim, dim, rng)),
      b_z(prefix + ".b_z", Matrix::Zero(1, dim)),
      w_r(prefix + ".w_r", xavier_uniform(2 * dim, dim, rng)),
      b_r(prefix + ".b_r", Matrix::Zero(1, dim)),
      w_h(prefix + ".w_h", xavier_uniform(2 * dim, dim, rng)),
      b_h(prefix + ".b_h", Matrix::Zero(1, dim)) {}

Tensor GruCell::forward(Tape& tape, const Tensor& prev, const Tensor& cand) {
  if (prev.rows() != cand.rows() || prev.cols() != cand.cols()) shape_error("gru_cell", prev.value(), cand.value());
  const auto joint = concat_cols({prev, cand});
  const auto z = sigmoid(add(matmul(joint, tape.parameter(w_z)), tape.parameter(b_z)));
  const auto r = sigmoid(add(matmul(joint, tape.parameter(w_r)), tape.parameter(b_r)));
  const auto gated = concat_cols({mul(r, prev), cand});
  const auto h = tanh(add(matmul(gated, tape.parameter(w_h)), tape.parameter(b_h)));
  // (1 - z) .* prev + z .* h  ==  prev + z .* (h - prev)
  return add(prev, mul(z, sub(h, prev)));
}

std::vector<Parameter*> GruCell::parameters() { return {&w_z, &b_z, &w_r, &b_r, &w_h, &b_h}; }

Tensor gru_cell(Tape& tape, const Tensor& prev, const Tensor& cand, GruCell& params) {
  return params.forward(tape, prev, cand);
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = *params_[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) shape_error("adam_step", p.value, p.grad);
    if (!p.grad.allFinite()) throw NumericError("non-finite gradient for parameter '" + p.name + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * p.grad;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = m_[i].array() / c1;
    const auto v_hat = v_[i].array() / c2;
    p.value.array() -= options_.lr * m_hat / (v_hat.sqrt() + options_.eps);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& loss, std::span<Parameter* const> params, double h) {
  if (!(h > 0.0)) throw ShapeError("grad_check: step must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    const auto l = loss(tape);
    if (!std::isfinite(l.item())) throw NumericError("grad_check: non-finite loss");
    tape.backward(l);
  }
  auto evaluate = [&loss] {
    Tape tape;
    const double v = loss(tape).item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss under perturbation");
    return v;
  };

  GradCheckResult result;
  for (auto* p : params) {
    const Matrix analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value(i);
      p->value(i) = saved + h;
      const double up = evaluate();
      p->value(i) = saved - h;
      const double down = evaluate();
      p->value(i) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(numeric - analytic(i)) / std::max(1.0, std::abs(analytic(i)));
      if (err > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

GradCheckResult grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Matrix& point, double h) {
  Parameter x("x", point);
  Parameter* params[] = {&x};
  return grad_check([&](Tape& tape) { return f(tape, tape.parameter(x)); }, params, h);
}

}  // namespace hetrel
