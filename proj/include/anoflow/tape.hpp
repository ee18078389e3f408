#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anoflow/tensor.hpp"

namespace anoflow {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation tape over dense row-major Tensors.
///
/// Ops evaluate eagerly as the expression is built; the tape records the DAG
/// in topological order. backward() on a scalar output accumulates gradients
/// additively into every trainable leaf. A tape is single-threaded per
/// training step; the kernels it calls may parallelize internally.
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // leaves
  Var input(Tensor value, bool trainable);
  Var constant(Tensor value) { return input(std::move(value), false); }

  // elementwise, shapes must match exactly
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var clamp(Var a, double lo, double hi);
  Var square(Var a) { return mul(a, a); }

  // a[m,n] + bias[n] broadcast over rows
  Var add_row(Var a, Var bias);

  // 2-D matrix products
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);
  // batched products over the leading axis of 3-D tensors
  Var bmm(Var a, Var b);
  Var bmm_nt(Var a, Var b);
  // x @ (mask o w); mask is a constant 0/1 tensor shaped like w
  Var masked_linear(Var x, Var w, const Tensor& mask);

  // softmax over the last axis
  Var softmax(Var a);

  // column range [c0, c1) of a 2-D tensor
  Var slice_cols(Var a, std::size_t c0, std::size_t c1);
  // concatenate 2-D tensors with equal row counts along columns
  Var concat_cols(const std::vector<Var>& parts);
  // out[:, j] = a[:, perm[j]]
  Var permute_cols(Var a, std::vector<std::size_t> perm);
  Var reshape(Var a, std::vector<std::size_t> shape);

  // reductions
  Var rowsum(Var a);          // [m,n] -> [m,1]
  Var sum(Var a);             // -> scalar
  Var mean(Var a);            // -> scalar

  /// Accumulate d(out)/d(leaf) into every trainable leaf. `out` must be scalar.
  void backward(Var out);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() w.r.t. v. Zero tensor if backward never
  /// reached v. Throws UsageError before any backward() or for non-grad nodes.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  /// When on (default), every op output is scanned and a NumericError naming
  /// the op is thrown on NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

  std::size_t size() const { return nodes_.size(); }

private:
  enum class Op : std::uint8_t {
    Input, Add, Sub, Mul, Scale, AddRow, Exp, Log, Tanh, Sigmoid, Relu, Clamp,
    MatMul, MatMulNT, Bmm, BmmNT, Softmax, SliceCols, ConcatCols, PermuteCols,
    Reshape, RowSum, Sum, Mean
  };

  struct Node {
    Op op;
    int in0 = -1, in1 = -1;
    std::vector<int> extra;          // ConcatCols inputs
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    double s0 = 0.0, s1 = 0.0;       // scalar attrs (scale factor, clamp bounds)
    std::size_t i0 = 0, i1 = 0;      // slice range
    std::vector<std::size_t> perm;
  };

  Var push(Node node, const char* opname);
  void backward_node(int id);
  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  bool check_finite_ = true;
  bool ran_backward_ = false;
};

}  // namespace anoflow
