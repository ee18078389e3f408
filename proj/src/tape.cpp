#include "anoflow/tape.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "anoflow/errors.hpp"
#include "anoflow/kernels.hpp"

namespace anoflow {

namespace {
namespace k = kernels;

void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}
}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddRow: return "add_row";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::Clamp: return "clamp";
    case Op::MatMul: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::Bmm: return "bmm";
    case Op::BmmNT: return "bmm_nt";
    case Op::Softmax: return "softmax";
    case Op::SliceCols: return "slice_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::PermuteCols: return "permute_cols";
    case Op::Reshape: return "reshape";
    case Op::RowSum: return "rowsum";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
  }
  return "?";
}

Var Tape::push(Node node, const char* opname) {
  if (check_finite_ && !node.value.all_finite())
    throw NumericError(std::string("non-finite output of op '") + opname + "'");
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw UsageError("value() on invalid Var");
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw UsageError("grad() on invalid Var");
  if (!ran_backward_) throw UsageError("grad() before backward()");
  const Node& n = nodes_[v.id];
  if (!n.requires_grad) throw UsageError("grad() on a node that does not require gradients");
  return n.grad;
}

bool Tape::requires_grad(Var v) const {
  return v.valid() && nodes_[v.id].requires_grad;
}

Var Tape::input(Tensor value, bool trainable) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  n.requires_grad = trainable;
  return push(std::move(n), "input");
}

#define ANOFLOW_BINARY_PRELUDE(a, b)                      \
  const Tensor& va = nodes_[a.id].value;                  \
  const Tensor& vb = nodes_[b.id].value;                  \
  Node n;                                                 \
  n.in0 = a.id;                                           \
  n.in1 = b.id;                                           \
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;

#define ANOFLOW_UNARY_PRELUDE(a)                          \
  const Tensor& va = nodes_[a.id].value;                  \
  Node n;                                                 \
  n.in0 = a.id;                                           \
  n.requires_grad = nodes_[a.id].requires_grad;

Var Tape::add(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.same_shape(vb), "add: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  n.op = Op::Add;
  n.value = Tensor(va.shape());
  k::add(va.data(), vb.data(), n.value.data(), va.numel());
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.same_shape(vb), "sub: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  n.op = Op::Sub;
  n.value = Tensor(va.shape());
  k::sub(va.data(), vb.data(), n.value.data(), va.numel());
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.same_shape(vb), "mul: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  n.op = Op::Mul;
  n.value = Tensor(va.shape());
  k::mul(va.data(), vb.data(), n.value.data(), va.numel());
  return push(std::move(n), "mul");
}

Var Tape::scale(Var a, double c) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Scale;
  n.s0 = c;
  n.value = Tensor(va.shape());
  k::scale(va.data(), c, n.value.data(), va.numel());
  return push(std::move(n), "scale");
}

Var Tape::add_row(Var a, Var bias) {
  ANOFLOW_BINARY_PRELUDE(a, bias)
  require(va.rank() == 2, "add_row: lhs must be 2-D");
  require(vb.numel() == va.cols(), "add_row: bias length " + std::to_string(vb.numel()) +
                                       " vs cols " + std::to_string(va.cols()));
  n.op = Op::AddRow;
  n.value = Tensor(va.shape());
  const std::size_t rows = va.rows(), cols = va.cols();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      n.value[i * cols + j] = va[i * cols + j] + vb[j];
  return push(std::move(n), "add_row");
}

Var Tape::exp(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Exp;
  n.value = Tensor(va.shape());
  k::vexp(va.data(), n.value.data(), va.numel());
  return push(std::move(n), "exp");
}

Var Tape::log(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Log;
  n.value = Tensor(va.shape());
  k::vlog(va.data(), n.value.data(), va.numel());
  return push(std::move(n), "log");
}

Var Tape::tanh(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Tanh;
  n.value = Tensor(va.shape());
  k::vtanh(va.data(), n.value.data(), va.numel());
  return push(std::move(n), "tanh");
}

Var Tape::sigmoid(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Sigmoid;
  n.value = Tensor(va.shape());
  k::vsigmoid(va.data(), n.value.data(), va.numel());
  return push(std::move(n), "sigmoid");
}

Var Tape::relu(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Relu;
  n.value = Tensor(va.shape());
  k::vrelu(va.data(), n.value.data(), va.numel());
  return push(std::move(n), "relu");
}

Var Tape::clamp(Var a, double lo, double hi) {
  require(lo < hi, "clamp: lo must be below hi");
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Clamp;
  n.s0 = lo;
  n.s1 = hi;
  n.value = Tensor(va.shape());
  k::vclamp(va.data(), lo, hi, n.value.data(), va.numel());
  return push(std::move(n), "clamp");
}

Var Tape::matmul(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.rank() == 2 && vb.rank() == 2, "matmul: operands must be 2-D");
  require(va.cols() == vb.rows(), "matmul: inner dims " + va.shape_str() + " @ " + vb.shape_str());
  n.op = Op::MatMul;
  n.value = Tensor({va.rows(), vb.cols()});
  k::matmul_nn(va.data(), vb.data(), n.value.data(), va.rows(), va.cols(), vb.cols(), false);
  return push(std::move(n), "matmul");
}

Var Tape::matmul_nt(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.rank() == 2 && vb.rank() == 2, "matmul_nt: operands must be 2-D");
  require(va.cols() == vb.cols(),
          "matmul_nt: inner dims " + va.shape_str() + " @ " + vb.shape_str() + "^T");
  n.op = Op::MatMulNT;
  n.value = Tensor({va.rows(), vb.rows()});
  k::matmul_nt(va.data(), vb.data(), n.value.data(), va.rows(), va.cols(), vb.rows(), false);
  return push(std::move(n), "matmul_nt");
}

Var Tape::bmm(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.rank() == 3 && vb.rank() == 3, "bmm: operands must be 3-D");
  require(va.dim(0) == vb.dim(0) && va.dim(2) == vb.dim(1),
          "bmm: dims " + va.shape_str() + " @ " + vb.shape_str());
  n.op = Op::Bmm;
  n.value = Tensor({va.dim(0), va.dim(1), vb.dim(2)});
  k::bmm_nn(va.data(), vb.data(), n.value.data(), va.dim(0), va.dim(1), va.dim(2), vb.dim(2),
            false);
  return push(std::move(n), "bmm");
}

Var Tape::bmm_nt(Var a, Var b) {
  ANOFLOW_BINARY_PRELUDE(a, b)
  require(va.rank() == 3 && vb.rank() == 3, "bmm_nt: operands must be 3-D");
  require(va.dim(0) == vb.dim(0) && va.dim(2) == vb.dim(2),
          "bmm_nt: dims " + va.shape_str() + " @ " + vb.shape_str() + "^T");
  n.op = Op::BmmNT;
  n.value = Tensor({va.dim(0), va.dim(1), vb.dim(1)});
  k::bmm_nt(va.data(), vb.data(), n.value.data(), va.dim(0), va.dim(1), va.dim(2), vb.dim(1),
            false);
  return push(std::move(n), "bmm_nt");
}

Var Tape::masked_linear(Var x, Var w, const Tensor& mask) {
  require(nodes_[w.id].value.same_shape(mask), "masked_linear: mask shape mismatch");
  Var masked = mul(w, constant(mask));
  return matmul(x, masked);
}

Var Tape::softmax(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  require(va.rank() >= 1 && va.cols() >= 1, "softmax: empty input");
  n.op = Op::Softmax;
  n.value = Tensor(va.shape());
  k::softmax_rows(va.data(), n.value.data(), va.rows(), va.cols());
  return push(std::move(n), "softmax");
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
  ANOFLOW_UNARY_PRELUDE(a)
  require(va.rank() == 2, "slice_cols: input must be 2-D");
  require(c0 < c1 && c1 <= va.cols(), "slice_cols: bad range");
  n.op = Op::SliceCols;
  n.i0 = c0;
  n.i1 = c1;
  const std::size_t rows = va.rows(), cols = va.cols(), w = c1 - c0;
  n.value = Tensor({rows, w});
  for (std::size_t i = 0; i < rows; ++i)
    std::memcpy(n.value.data() + i * w, va.data() + i * cols + c0, w * sizeof(double));
  return push(std::move(n), "slice_cols");
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = nodes_[parts[0].id].value.rows();
  std::size_t total = 0;
  bool grad = false;
  for (Var p : parts) {
    const Tensor& v = nodes_[p.id].value;
    require(v.rank() == 2 && v.rows() == rows, "concat_cols: row mismatch");
    total += v.cols();
    grad = grad || nodes_[p.id].requires_grad;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.requires_grad = grad;
  for (Var p : parts) n.extra.push_back(p.id);
  n.value = Tensor({rows, total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& v = nodes_[p.id].value;
    const std::size_t w = v.cols();
    for (std::size_t i = 0; i < rows; ++i)
      std::memcpy(n.value.data() + i * total + off, v.data() + i * w, w * sizeof(double));
    off += w;
  }
  return push(std::move(n), "concat_cols");
}

Var Tape::permute_cols(Var a, std::vector<std::size_t> perm) {
  ANOFLOW_UNARY_PRELUDE(a)
  require(va.rank() == 2 && perm.size() == va.cols(), "permute_cols: bad permutation size");
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    require(p < perm.size() && !seen[p], "permute_cols: not a permutation");
    seen[p] = true;
  }
  n.op = Op::PermuteCols;
  n.perm = std::move(perm);
  const std::size_t rows = va.rows(), cols = va.cols();
  n.value = Tensor(va.shape());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      n.value[i * cols + j] = va[i * cols + n.perm[j]];
  return push(std::move(n), "permute_cols");
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  ANOFLOW_UNARY_PRELUDE(a)
  Tensor out(std::move(shape), std::vector<double>(va.vec()));
  n.op = Op::Reshape;
  n.value = std::move(out);
  return push(std::move(n), "reshape");
}

Var Tape::rowsum(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  require(va.rank() == 2, "rowsum: input must be 2-D");
  n.op = Op::RowSum;
  n.value = Tensor({va.rows(), 1});
  k::rowsum(va.data(), n.value.data(), va.rows(), va.cols());
  return push(std::move(n), "rowsum");
}

Var Tape::sum(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Sum;
  n.value = Tensor::scalar(k::sum(va.data(), va.numel()));
  return push(std::move(n), "sum");
}

Var Tape::mean(Var a) {
  ANOFLOW_UNARY_PRELUDE(a)
  n.op = Op::Mean;
  n.value = Tensor::scalar(k::sum(va.data(), va.numel()) / static_cast<double>(va.numel()));
  return push(std::move(n), "mean");
}

#undef ANOFLOW_BINARY_PRELUDE
#undef ANOFLOW_UNARY_PRELUDE

void Tape::backward(Var out) {
  if (!out.valid() || out.id >= static_cast<int>(nodes_.size()))
    throw UsageError("backward() on invalid Var");
  if (nodes_[out.id].value.numel() != 1)
    throw UsageError("backward() requires a scalar output, got shape " +
                     nodes_[out.id].value.shape_str());
  // zero-initialize gradients of every grad-requiring node
  for (Node& n : nodes_) {
    if (n.requires_grad)
      n.grad = Tensor(n.value.shape());
    else
      n.grad = Tensor();
  }
  ran_backward_ = true;
  if (!nodes_[out.id].requires_grad) return;  // nothing trainable feeds the output
  nodes_[out.id].grad[0] = 1.0;
  for (int id = out.id; id >= 0; --id) {
    if (nodes_[id].requires_grad && nodes_[id].op != Op::Input) backward_node(id);
  }
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const std::size_t count = g.numel();
  auto in_grad = [&](int in) -> Tensor* {
    return nodes_[in].requires_grad ? &nodes_[in].grad : nullptr;
  };
  Tensor* g0 = n.in0 >= 0 ? in_grad(n.in0) : nullptr;
  Tensor* g1 = n.in1 >= 0 ? in_grad(n.in1) : nullptr;
  const Tensor* v0 = n.in0 >= 0 ? &nodes_[n.in0].value : nullptr;
  const Tensor* v1 = n.in1 >= 0 ? &nodes_[n.in1].value : nullptr;

  switch (n.op) {
    case Op::Input:
      break;
    case Op::Add:
      if (g0) k::acc(g0->data(), g.data(), count);
      if (g1) k::acc(g1->data(), g.data(), count);
      break;
    case Op::Sub:
      if (g0) k::acc(g0->data(), g.data(), count);
      if (g1) k::acc_neg(g1->data(), g.data(), count);
      break;
    case Op::Mul:
      if (g0) k::acc_mul(g0->data(), g.data(), v1->data(), count);
      if (g1) k::acc_mul(g1->data(), g.data(), v0->data(), count);
      break;
    case Op::Scale:
      if (g0) k::acc_scaled(g0->data(), g.data(), n.s0, count);
      break;
    case Op::AddRow:
      if (g0) k::acc(g0->data(), g.data(), count);
      if (g1) k::colsum_acc(g1->data(), g.data(), v0->rows(), v0->cols());
      break;
    case Op::Exp:
      if (g0) k::exp_bwd(g0->data(), g.data(), n.value.data(), count);
      break;
    case Op::Log:
      if (g0) k::log_bwd(g0->data(), g.data(), v0->data(), count);
      break;
    case Op::Tanh:
      if (g0) k::tanh_bwd(g0->data(), g.data(), n.value.data(), count);
      break;
    case Op::Sigmoid:
      if (g0) k::sigmoid_bwd(g0->data(), g.data(), n.value.data(), count);
      break;
    case Op::Relu:
      if (g0) k::relu_bwd(g0->data(), g.data(), v0->data(), count);
      break;
    case Op::Clamp:
      if (g0) k::clamp_bwd(g0->data(), g.data(), v0->data(), n.s0, n.s1, count);
      break;
    case Op::MatMul: {
      const std::size_t m = v0->rows(), kk = v0->cols(), nn = v1->cols();
      if (g0) k::matmul_nt(g.data(), v1->data(), g0->data(), m, nn, kk, true);
      if (g1) k::matmul_tn(v0->data(), g.data(), g1->data(), kk, m, nn, true);
      break;
    }
    case Op::MatMulNT: {
      // c = a @ b^T with a[m,k], b[n,k]
      const std::size_t m = v0->rows(), kk = v0->cols(), nn = v1->rows();
      if (g0) k::matmul_nn(g.data(), v1->data(), g0->data(), m, nn, kk, true);
      if (g1) k::matmul_tn(g.data(), v0->data(), g1->data(), nn, m, kk, true);
      break;
    }
    case Op::Bmm: {
      const std::size_t b = v0->dim(0), m = v0->dim(1), kk = v0->dim(2), nn = v1->dim(2);
      for (std::size_t s = 0; s < b; ++s) {
        const double* gs = g.data() + s * m * nn;
        if (g0)
          k::matmul_nt(gs, v1->data() + s * kk * nn, g0->data() + s * m * kk, m, nn, kk, true);
        if (g1)
          k::matmul_tn(v0->data() + s * m * kk, gs, g1->data() + s * kk * nn, kk, m, nn, true);
      }
      break;
    }
    case Op::BmmNT: {
      const std::size_t b = v0->dim(0), m = v0->dim(1), kk = v0->dim(2), nn = v1->dim(1);
      for (std::size_t s = 0; s < b; ++s) {
        const double* gs = g.data() + s * m * nn;
        if (g0)
          k::matmul_nn(gs, v1->data() + s * nn * kk, g0->data() + s * m * kk, m, nn, kk, true);
        if (g1)
          k::matmul_tn(gs, v0->data() + s * m * kk, g1->data() + s * nn * kk, nn, m, kk, true);
      }
      break;
    }
    case Op::Softmax:
      if (g0) k::softmax_rows_bwd(g0->data(), g.data(), n.value.data(), v0->rows(), v0->cols());
      break;
    case Op::SliceCols: {
      if (!g0) break;
      const std::size_t rows = v0->rows(), cols = v0->cols(), w = n.i1 - n.i0;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < w; ++j) (*g0)[i * cols + n.i0 + j] += g[i * w + j];
      break;
    }
    case Op::ConcatCols: {
      const std::size_t rows = n.value.rows(), total = n.value.cols();
      std::size_t off = 0;
      for (int in : n.extra) {
        const std::size_t w = nodes_[in].value.cols();
        if (nodes_[in].requires_grad) {
          Tensor& gi = nodes_[in].grad;
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < w; ++j) gi[i * w + j] += g[i * total + off + j];
        }
        off += w;
      }
      break;
    }
    case Op::PermuteCols: {
      if (!g0) break;
      const std::size_t rows = v0->rows(), cols = v0->cols();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) (*g0)[i * cols + n.perm[j]] += g[i * cols + j];
      break;
    }
    case Op::Reshape:
      if (g0) k::acc(g0->data(), g.data(), count);
      break;
    case Op::RowSum:
      if (g0) k::rowsum_bwd(g0->data(), g.data(), v0->rows(), v0->cols());
      break;
    case Op::Sum:
      if (g0) {
        const double gv = g[0];
        for (std::size_t i = 0; i < g0->numel(); ++i) (*g0)[i] += gv;
      }
      break;
    case Op::Mean:
      if (g0) {
        const double gv = g[0] / static_cast<double>(g0->numel());
        for (std::size_t i = 0; i < g0->numel(); ++i) (*g0)[i] += gv;
      }
      break;
  }
}

}  // namespace anoflow
