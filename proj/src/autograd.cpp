#include "ckgen/autograd.hpp"

#include <cmath>
#include <stdexcept>

#include "ckgen/kernels.hpp"

namespace ckgen {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("tape: ") + what);
}

}  // namespace

Var Tape::push(Tensor value, bool needs_grad, std::function<void()> backprop) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grads_ && needs_grad;
  if (n.needs_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.rows, n.value.cols);
  return n.grad;
}

const Tensor& Tape::grad(Var v) const { return nodes_[v.id].grad; }

Var Tape::leaf(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.cols == B.rows, "matmul shape mismatch");
  Tensor C(A.rows, B.cols);
  kernels::gemm_nn(A.ptr(), B.ptr(), C.ptr(), A.rows, A.cols, B.cols);
  const std::size_t self = nodes_.size();
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(C), ng, [this, self, ia, ib] {
    const Tensor& dC = nodes_[self].grad;
    const Tensor& Av = nodes_[ia].value;
    const Tensor& Bv = nodes_[ib].value;
    if (nodes_[ia].needs_grad) {
      // dA += dC * B^T
      Tensor tmp(Av.rows, Av.cols);
      kernels::gemm_nt(dC.ptr(), Bv.ptr(), tmp.ptr(), Av.rows, Bv.cols, Av.cols);
      kernels::axpy(1.0, tmp.ptr(), grad_ref(ia).ptr(), tmp.size());
    }
    if (nodes_[ib].needs_grad) {
      // dB += A^T * dC
      kernels::gemm_tn_acc(Av.ptr(), dC.ptr(), grad_ref(ib).ptr(), Av.cols, Av.rows, Bv.cols);
    }
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.cols == B.cols, "matmul_nt shape mismatch");
  Tensor C(A.rows, B.rows);
  kernels::gemm_nt(A.ptr(), B.ptr(), C.ptr(), A.rows, A.cols, B.rows);
  const std::size_t self = nodes_.size();
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(C), ng, [this, self, ia, ib] {
    const Tensor& dC = nodes_[self].grad;  // (m x n), n = B.rows
    const Tensor& Av = nodes_[ia].value;   // (m x k)
    const Tensor& Bv = nodes_[ib].value;   // (n x k)
    if (nodes_[ia].needs_grad) {
      // dA += dC * B
      Tensor tmp(Av.rows, Av.cols);
      kernels::gemm_nn(dC.ptr(), Bv.ptr(), tmp.ptr(), Av.rows, Bv.rows, Bv.cols);
      kernels::axpy(1.0, tmp.ptr(), grad_ref(ia).ptr(), tmp.size());
    }
    if (nodes_[ib].needs_grad) {
      // dB += dC^T * A
      kernels::gemm_tn_acc(dC.ptr(), Av.ptr(), grad_ref(ib).ptr(), Bv.rows, Av.rows, Av.cols);
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "add shape mismatch");
  Tensor C(A.rows, A.cols);
  kernels::add(A.ptr(), B.ptr(), C.ptr(), C.size());
  const std::size_t self = nodes_.size();
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(C), ng, [this, self, ia, ib] {
    const Tensor& dC = nodes_[self].grad;
    if (nodes_[ia].needs_grad) kernels::axpy(1.0, dC.ptr(), grad_ref(ia).ptr(), dC.size());
    if (nodes_[ib].needs_grad) kernels::axpy(1.0, dC.ptr(), grad_ref(ib).ptr(), dC.size());
  });
}

Var Tape::add_rowvec(Var x, Var bias) {
  const Tensor& X = value(x);
  const Tensor& B = value(bias);
  check(B.rows == 1 && B.cols == X.cols, "add_rowvec shape mismatch");
  Tensor C = X;
  for (std::size_t r = 0; r < C.rows; ++r)
    kernels::axpy(1.0, B.ptr(), C.row_ptr(r), C.cols);
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id, ib = bias.id;
  const bool ng = nodes_[ix].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(C), ng, [this, self, ix, ib] {
    const Tensor& dC = nodes_[self].grad;
    if (nodes_[ix].needs_grad) kernels::axpy(1.0, dC.ptr(), grad_ref(ix).ptr(), dC.size());
    if (nodes_[ib].needs_grad) {
      Tensor& dB = grad_ref(ib);
      for (std::size_t r = 0; r < dC.rows; ++r)
        kernels::axpy(1.0, dC.row_ptr(r), dB.ptr(), dC.cols);
    }
  });
}

Var Tape::hadamard(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "hadamard shape mismatch");
  Tensor C(A.rows, A.cols);
  kernels::mul(A.ptr(), B.ptr(), C.ptr(), C.size());
  const std::size_t self = nodes_.size();
  const std::size_t ia = a.id, ib = b.id;
  const bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(C), ng, [this, self, ia, ib] {
    const Tensor& dC = nodes_[self].grad;
    if (nodes_[ia].needs_grad) {
      Tensor tmp(dC.rows, dC.cols);
      kernels::mul(dC.ptr(), nodes_[ib].value.ptr(), tmp.ptr(), tmp.size());
      kernels::axpy(1.0, tmp.ptr(), grad_ref(ia).ptr(), tmp.size());
    }
    if (nodes_[ib].needs_grad) {
      Tensor tmp(dC.rows, dC.cols);
      kernels::mul(dC.ptr(), nodes_[ia].value.ptr(), tmp.ptr(), tmp.size());
      kernels::axpy(1.0, tmp.ptr(), grad_ref(ib).ptr(), tmp.size());
    }
  });
}

Var Tape::scale(Var x, double s) {
  Tensor C = value(x);
  kernels::scale(C.ptr(), s, C.size());
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(C), nodes_[ix].needs_grad, [this, self, ix, s] {
    kernels::axpy(s, nodes_[self].grad.ptr(), grad_ref(ix).ptr(), nodes_[self].grad.size());
  });
}

Var Tape::tanh_op(Var x) {
  Tensor C = value(x);
  for (double& v : C.data) v = std::tanh(v);
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(C), nodes_[ix].needs_grad, [this, self, ix] {
    const Tensor& dC = nodes_[self].grad;
    const Tensor& Y = nodes_[self].value;
    Tensor& dX = grad_ref(ix);
    for (std::size_t i = 0; i < dC.size(); ++i)
      dX.data[i] += dC.data[i] * (1.0 - Y.data[i] * Y.data[i]);
  });
}

Var Tape::sigmoid(Var x) {
  Tensor C = value(x);
  for (double& v : C.data) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(C), nodes_[ix].needs_grad, [this, self, ix] {
    const Tensor& dC = nodes_[self].grad;
    const Tensor& Y = nodes_[self].value;
    Tensor& dX = grad_ref(ix);
    for (std::size_t i = 0; i < dC.size(); ++i)
      dX.data[i] += dC.data[i] * Y.data[i] * (1.0 - Y.data[i]);
  });
}

Var Tape::relu(Var x) {
  Tensor C = value(x);
  for (double& v : C.data) v = v > 0.0 ? v : 0.0;
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(C), nodes_[ix].needs_grad, [this, self, ix] {
    const Tensor& dC = nodes_[self].grad;
    const Tensor& Y = nodes_[self].value;
    Tensor& dX = grad_ref(ix);
    for (std::size_t i = 0; i < dC.size(); ++i)
      if (Y.data[i] > 0.0) dX.data[i] += dC.data[i];
  });
}

Var Tape::softmax_rows_masked(Var x, const Tensor& mask) {
  const Tensor& X = value(x);
  check(X.same_shape(mask), "softmax mask shape mismatch");
  Tensor Y(X.rows, X.cols);
  for (std::size_t r = 0; r < X.rows; ++r) {
    double maxv = -HUGE_VAL;
    bool any = false;
    for (std::size_t c = 0; c < X.cols; ++c) {
      if (mask.at(r, c) <= kMaskedThreshold) continue;
      any = true;
      maxv = std::max(maxv, X.at(r, c) + mask.at(r, c));
    }
    if (!any) continue;  // fully masked row stays all-zero
    double sum = 0.0;
    for (std::size_t c = 0; c < X.cols; ++c) {
      if (mask.at(r, c) <= kMaskedThreshold) continue;
      const double e = std::exp(X.at(r, c) + mask.at(r, c) - maxv);
      Y.at(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < X.cols; ++c) Y.at(r, c) /= sum;
  }
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(Y), nodes_[ix].needs_grad, [this, self, ix] {
    const Tensor& dC = nodes_[self].grad;
    const Tensor& Y2 = nodes_[self].value;
    Tensor& dX = grad_ref(ix);
    for (std::size_t r = 0; r < dC.rows; ++r) {
      const double dot = kernels::dot(dC.row_ptr(r), Y2.row_ptr(r), dC.cols);
      for (std::size_t c = 0; c < dC.cols; ++c)
        dX.at(r, c) += Y2.at(r, c) * (dC.at(r, c) - dot);
    }
  });
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = value(x);
  const Tensor& G = value(gain);
  const Tensor& B = value(bias);
  check(G.rows == 1 && G.cols == X.cols && B.rows == 1 && B.cols == X.cols,
        "layer_norm shape mismatch");
  Tensor Y(X.rows, X.cols);
  const double n = static_cast<double>(X.cols);
  for (std::size_t r = 0; r < X.rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < X.cols; ++c) mean += X.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < X.cols; ++c) {
      const double d = X.at(r, c) - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < X.cols; ++c)
      Y.at(r, c) = (X.at(r, c) - mean) * inv * G.data[c] + B.data[c];
  }
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id, ig = gain.id, ib = bias.id;
  const bool ng = nodes_[ix].needs_grad || nodes_[ig].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(Y), ng, [this, self, ix, ig, ib, eps] {
    const Tensor& dC = nodes_[self].grad;
    const Tensor& X2 = nodes_[ix].value;
    const Tensor& G2 = nodes_[ig].value;
    const double n2 = static_cast<double>(X2.cols);
    for (std::size_t r = 0; r < X2.rows; ++r) {
      double mean = 0.0;
      for (std::size_t c = 0; c < X2.cols; ++c) mean += X2.at(r, c);
      mean /= n2;
      double var = 0.0;
      for (std::size_t c = 0; c < X2.cols; ++c) {
        const double d = X2.at(r, c) - mean;
        var += d * d;
      }
      var /= n2;
      const double inv = 1.0 / std::sqrt(var + eps);
      // dyhat = dC ∘ g; dx = inv * (dyhat - mean(dyhat) - xhat * mean(dyhat ∘ xhat))
      double sum_dyhat = 0.0;
      double sum_dyhat_xhat = 0.0;
      for (std::size_t c = 0; c < X2.cols; ++c) {
        const double xhat = (X2.at(r, c) - mean) * inv;
        const double dyhat = dC.at(r, c) * G2.data[c];
        sum_dyhat += dyhat;
        sum_dyhat_xhat += dyhat * xhat;
      }
      if (nodes_[ix].needs_grad) {
        Tensor& dX = grad_ref(ix);
        for (std::size_t c = 0; c < X2.cols; ++c) {
          const double xhat = (X2.at(r, c) - mean) * inv;
          const double dyhat = dC.at(r, c) * G2.data[c];
          dX.at(r, c) += inv * (dyhat - sum_dyhat / n2 - xhat * sum_dyhat_xhat / n2);
        }
      }
      if (nodes_[ig].needs_grad) {
        Tensor& dG = grad_ref(ig);
        for (std::size_t c = 0; c < X2.cols; ++c)
          dG.data[c] += dC.at(r, c) * (X2.at(r, c) - mean) * inv;
      }
      if (nodes_[ib].needs_grad) {
        Tensor& dB = grad_ref(ib);
        for (std::size_t c = 0; c < X2.cols; ++c) dB.data[c] += dC.at(r, c);
      }
    }
  });
}

Var Tape::gather_rows(Var table, std::vector<std::size_t> indices) {
  const Tensor& T = value(table);
  Tensor Y(indices.size(), T.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    check(indices[i] < T.rows, "gather_rows index out of range");
    std::copy(T.row_ptr(indices[i]), T.row_ptr(indices[i]) + T.cols, Y.row_ptr(i));
  }
  const std::size_t self = nodes_.size();
  const std::size_t it = table.id;
  return push(std::move(Y), nodes_[it].needs_grad,
              [this, self, it, idx = std::move(indices)] {
                const Tensor& dC = nodes_[self].grad;
                Tensor& dT = grad_ref(it);
                for (std::size_t i = 0; i < idx.size(); ++i)
                  kernels::axpy(1.0, dC.row_ptr(i), dT.row_ptr(idx[i]), dC.cols);
              });
}

Var Tape::slice_cols(Var x, std::size_t c0, std::size_t c1) {
  const Tensor& X = value(x);
  check(c0 < c1 && c1 <= X.cols, "slice_cols bad range");
  Tensor Y(X.rows, c1 - c0);
  for (std::size_t r = 0; r < X.rows; ++r)
    std::copy(X.row_ptr(r) + c0, X.row_ptr(r) + c1, Y.row_ptr(r));
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(Y), nodes_[ix].needs_grad, [this, self, ix, c0] {
    const Tensor& dC = nodes_[self].grad;
    Tensor& dX = grad_ref(ix);
    for (std::size_t r = 0; r < dC.rows; ++r)
      kernels::axpy(1.0, dC.row_ptr(r), dX.row_ptr(r) + c0, dC.cols);
  });
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  check(!xs.empty(), "concat_cols of nothing");
  const std::size_t rows = value(xs[0]).rows;
  std::size_t cols = 0;
  bool ng = false;
  for (Var v : xs) {
    check(value(v).rows == rows, "concat_cols row mismatch");
    cols += value(v).cols;
    ng = ng || nodes_[v.id].needs_grad;
  }
  Tensor Y(rows, cols);
  std::size_t off = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (Var v : xs) {
    const Tensor& X = value(v);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(X.row_ptr(r), X.row_ptr(r) + X.cols, Y.row_ptr(r) + off);
    ids.push_back(v.id);
    offsets.push_back(off);
    off += X.cols;
  }
  const std::size_t self = nodes_.size();
  return push(std::move(Y), ng,
              [this, self, ids = std::move(ids), offsets = std::move(offsets)] {
                const Tensor& dC = nodes_[self].grad;
                for (std::size_t p = 0; p < ids.size(); ++p) {
                  if (!nodes_[ids[p]].needs_grad) continue;
                  Tensor& dX = grad_ref(ids[p]);
                  for (std::size_t r = 0; r < dC.rows; ++r)
                    kernels::axpy(1.0, dC.row_ptr(r) + offsets[p], dX.row_ptr(r), dX.cols);
                }
              });
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  check(!xs.empty(), "concat_rows of nothing");
  const std::size_t cols = value(xs[0]).cols;
  std::size_t rows = 0;
  bool ng = false;
  for (Var v : xs) {
    check(value(v).cols == cols, "concat_rows col mismatch");
    rows += value(v).rows;
    ng = ng || nodes_[v.id].needs_grad;
  }
  Tensor Y(rows, cols);
  std::size_t off = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (Var v : xs) {
    const Tensor& X = value(v);
    std::copy(X.data.begin(), X.data.end(), Y.data.begin() + off * cols);
    ids.push_back(v.id);
    offsets.push_back(off);
    off += X.rows;
  }
  const std::size_t self = nodes_.size();
  return push(std::move(Y), ng,
              [this, self, ids = std::move(ids), offsets = std::move(offsets)] {
                const Tensor& dC = nodes_[self].grad;
                for (std::size_t p = 0; p < ids.size(); ++p) {
                  if (!nodes_[ids[p]].needs_grad) continue;
                  Tensor& dX = grad_ref(ids[p]);
                  kernels::axpy(1.0, dC.row_ptr(offsets[p]), dX.ptr(), dX.size());
                }
              });
}

Var Tape::scatter_add_rows(Var x, std::vector<std::size_t> indices, Var delta) {
  const Tensor& X = value(x);
  const Tensor& D = value(delta);
  check(D.rows == indices.size() && D.cols == X.cols, "scatter_add_rows shape mismatch");
  Tensor Y = X;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    check(indices[i] < X.rows, "scatter_add_rows index out of range");
    kernels::axpy(1.0, D.row_ptr(i), Y.row_ptr(indices[i]), Y.cols);
  }
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id, id = delta.id;
  const bool ng = nodes_[ix].needs_grad || nodes_[id].needs_grad;
  return push(std::move(Y), ng, [this, self, ix, id, idx = std::move(indices)] {
    const Tensor& dC = nodes_[self].grad;
    if (nodes_[ix].needs_grad) kernels::axpy(1.0, dC.ptr(), grad_ref(ix).ptr(), dC.size());
    if (nodes_[id].needs_grad) {
      Tensor& dD = grad_ref(id);
      for (std::size_t i = 0; i < idx.size(); ++i)
        kernels::axpy(1.0, dC.row_ptr(idx[i]), dD.row_ptr(i), dD.cols);
    }
  });
}

Var Tape::mean_cross_entropy(Var logits, std::vector<std::size_t> rows,
                             std::vector<int> targets) {
  check(rows.size() == targets.size(), "mean_cross_entropy rows/targets mismatch");
  const Tensor& L = value(logits);
  Tensor Y(1, 1);
  if (!rows.empty()) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      check(rows[i] < L.rows, "mean_cross_entropy row out of range");
      check(targets[i] >= 0 && static_cast<std::size_t>(targets[i]) < L.cols,
            "mean_cross_entropy target out of range");
      const double* row = L.row_ptr(rows[i]);
      double maxv = row[0];
      for (std::size_t c = 1; c < L.cols; ++c) maxv = std::max(maxv, row[c]);
      double sum = 0.0;
      for (std::size_t c = 0; c < L.cols; ++c) sum += std::exp(row[c] - maxv);
      total += maxv + std::log(sum) - row[targets[i]];
    }
    Y.data[0] = total / static_cast<double>(rows.size());
  }
  const std::size_t self = nodes_.size();
  const std::size_t il = logits.id;
  const bool empty = rows.empty();
  return push(std::move(Y), nodes_[il].needs_grad && !empty,
              [this, self, il, rows = std::move(rows), targets = std::move(targets)] {
                const double g = nodes_[self].grad.data[0] / static_cast<double>(rows.size());
                const Tensor& L2 = nodes_[il].value;
                Tensor& dL = grad_ref(il);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                  const double* row = L2.row_ptr(rows[i]);
                  double maxv = row[0];
                  for (std::size_t c = 1; c < L2.cols; ++c) maxv = std::max(maxv, row[c]);
                  double sum = 0.0;
                  for (std::size_t c = 0; c < L2.cols; ++c) sum += std::exp(row[c] - maxv);
                  double* drow = dL.row_ptr(rows[i]);
                  for (std::size_t c = 0; c < L2.cols; ++c)
                    drow[c] += g * std::exp(row[c] - maxv) / sum;
                  drow[targets[i]] -= g;
                }
              });
}

Var Tape::sum_all(Var x) {
  const Tensor& X = value(x);
  Tensor Y(1, 1);
  for (double v : X.data) Y.data[0] += v;
  const std::size_t self = nodes_.size();
  const std::size_t ix = x.id;
  return push(std::move(Y), nodes_[ix].needs_grad, [this, self, ix] {
    const double g = nodes_[self].grad.data[0];
    Tensor& dX = grad_ref(ix);
    for (double& v : dX.data) v += g;
  });
}

void Tape::backward(Var loss) {
  check(value(loss).rows == 1 && value(loss).cols == 1, "backward expects scalar loss");
  grad_ref(loss.id).data[0] += 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backprop || n.grad.data.empty()) continue;
    n.backprop();
  }
}

}  // namespace ckgen
