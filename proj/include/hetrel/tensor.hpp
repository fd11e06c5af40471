#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation applied to its Tensors in creation order,
// which is already a topological order, so backward() is a single reverse
// sweep. Tensors are lightweight handles (tape pointer + slot); the values
// live on the tape. Parameters live outside any tape and are attached per
// step with Tape::parameter(), which routes their gradient back into
// Parameter::grad on backward().

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hetrel {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Xavier-uniform initialization, bound sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  // Value of a 1x1 tensor.
  double item() const;

  Tape* tape() const { return tape_; }
  std::size_t slot() const { return slot_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t slot) : tape_(tape), slot_(slot) {}

  Tape* tape_ = nullptr;
  std::size_t slot_ = 0;
};

class Tape {
 public:
  // Receives the gradient flowing into the node; pushes contributions into
  // the node's inputs through Tape::accumulate.
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor variable(Matrix value);
  // Leaf bound to `p`: backward() adds this node's gradient into p.grad.
  Tensor parameter(Parameter& p);

  // Records an operation result. `backward` is only kept (and the node only
  // requires grad) when at least one of `inputs` requires grad.
  Tensor record(Matrix value, std::initializer_list<Tensor> inputs, Backward backward);
  Tensor record(Matrix value, std::span<const Tensor> inputs, Backward backward);

  void accumulate(const Tensor& t, const Matrix& contribution);

  // Reverse sweep from a 1x1 loss. A tape can be swept once; reset() clears it.
  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Tensor;

  struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    bool requires_grad = false;
    Backward backward;
    Parameter* parameter = nullptr;
  };

  const Node& node(const Tensor& t) const;
  Tensor push(Node node);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. All arguments must live on the same tape; shape mismatches
// throw ShapeError naming both shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
// Element-wise sum. `b` may also be a 1 x cols row vector (broadcast over
// rows) or a rows x 1 column vector (broadcast over columns).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// Element-wise (Hadamard) product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
// 1x1 tensor times matrix.
Tensor scalar_mul(const Tensor& s, const Tensor& x);
// Scales row i of x by s(i, 0).
Tensor row_scale(const Tensor& x, const Tensor& s);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_col(const Tensor& x, Eigen::Index col);
Tensor transpose(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
// log(sigmoid(x)) without overflow or underflow.
Tensor log_sigmoid(const Tensor& x);

// Softmax across each row.
Tensor row_softmax(const Tensor& x);
// Weighted mean of rows: sum_i w_i x_i / sum_i w_i, as a 1 x cols tensor.
Tensor masked_mean_rows(const Tensor& x, std::span<const double> weights);
// sum(a .* b) as 1x1.
Tensor inner_product(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// rows x 1 sums.
Tensor row_sum(const Tensor& x);
// rows x 1: log(sum_j w_ij exp(x_ij)) for constant non-negative weights. With
// rows of w summing to 1 this is the log of a weighted mean of exp(x).
Tensor weighted_logsumexp_rows(const Tensor& x, const Matrix& weights);

// Rows of x picked by index (repeats allowed), gradient scatter-added back.
Tensor gather_rows(const Tensor& x, std::span<const Eigen::Index> rows);
// Constant sparse matrix times tensor.
Tensor spmm(const SparseMatrix& a, const Tensor& x);

// ---------------------------------------------------------------------------

// Gated recurrent unit over row-batched states:
//   z  = sigmoid([prev, cand] W_z + b_z)
//   r  = sigmoid([prev, cand] W_r + b_r)
//   h~ = tanh([r .* prev, cand] W_h + b_h)
//   out = (1 - z) .* prev + z .* h~
struct GruCell {
  Parameter w_z, b_z, w_r, b_r, w_h, b_h;

  GruCell() = default;
  GruCell(const std::string& prefix, Eigen::Index dim, std::mt19937_64& rng);

  Tensor forward(Tape& tape, const Tensor& prev, const Tensor& cand);
  std::vector<Parameter*> parameters();
};

Tensor gru_cell(Tape& tape, const Tensor& prev, const Tensor& cand, GruCell& params);

// ---------------------------------------------------------------------------

struct AdamOptions {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});

  // Applies one update from the current Parameter::grad values. Throws
  // NumericError on a non-finite gradient before touching any parameter.
  void step();
  void zero_grad();

  long step_count() const { return t_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_, v_;
  AdamOptions options_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;  // max |numeric - analytic| / max(1, |analytic|)
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
};

// Central-difference check of a scalar function of `params`. `loss` builds
// the loss on the given tape (attaching parameters through Tape::parameter)
// and must be deterministic.
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& loss, std::span<Parameter* const> params,
                           double h = 1e-5);

// Convenience form for a function of a single matrix argument.
GradCheckResult grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Matrix& point,
                           double h = 1e-5);

}  // namespace hetrel
