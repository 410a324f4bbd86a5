// Reverse-mode autodiff over 2-D tensors, define-by-run.
//
// Each op appends a node holding its output value, parent ids and whatever
// the backward pass needs (cached softmax rows, slice bounds, ...). The
// backward pass walks nodes in reverse and dispatches on the op kind; no
// closures, so a tape is a plain data structure.
//
// Causal softmax is "exact-skip": row i reduces over columns 0..i only, and
// every other op is row-local or reduces in a fixed column order. Extending
// a sequence therefore never changes the arithmetic of earlier rows, which
// is what makes incremental decoding bit-identical to batch evaluation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hat/tensor.hpp"

namespace hat {

// A named trainable tensor with its gradient accumulator. Tapes reference
// parameters; they do not own them.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, int r, int c) : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

enum class OpKind {
  Input,
  Param,
  MatMul,         // A(LxM) * B(MxN)
  MatMulNT,       // A(LxM) * B(NxM)^T
  Add,
  AddRow,         // + bias row broadcast over rows
  AddConst,       // + constant tensor (no gradient into it)
  Scale,
  Relu,
  LayerNorm,      // row-wise, with 1xC gain and bias
  CausalSoftmax,  // square LxL, row i over cols 0..i
  SliceRows,
  SliceCols,
  ConcatRows,
  ConcatCols,
  GatherRows,     // embedding lookup / row selection
  OverwriteRows,  // copy of base with some rows replaced
  CrossEntropySum,
  AddScalars,     // sum of 1x1 nodes
};

template <typename T>
class Tape {
 public:
  using Id = int;

  struct Node {
    OpKind kind;
    Tensor<T> value;
    Tensor<T> grad;               // allocated on demand in backward()
    std::vector<Id> parents;
    std::vector<int> aux_i;       // slice bounds, gathered rows, targets...
    std::vector<T> aux_t;         // scale factor, loss weights
    Tensor<T> cache;              // op-specific forward cache
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
  };

  Id input(Tensor<T> v, bool needs_grad = false) {
    Node n;
    n.kind = OpKind::Input;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    return push(std::move(n));
  }

  Id param(Parameter<T>& p) {
    Node n;
    n.kind = OpKind::Param;
    n.value = p.value;  // snapshot; params do not change during one pass
    n.param = &p;
    n.needs_grad = true;
    return push(std::move(n));
  }

  Id matmul(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.cols == B.rows, "matmul: inner dims differ");
    Tensor<T> out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
      const T* arow = A.row(i);
      T* orow = out.row(i);
      for (int k = 0; k < A.cols; ++k) {
        T av = arow[k];
        const T* brow = B.row(k);
        for (int j = 0; j < B.cols; ++j) orow[j] += av * brow[j];
      }
    }
    return push_op(OpKind::MatMul, std::move(out), {a, b});
  }

  Id matmul_nt(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.cols == B.cols, "matmul_nt: inner dims differ");
    Tensor<T> out(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i) {
      const T* arow = A.row(i);
      for (int j = 0; j < B.rows; ++j) {
        const T* brow = B.row(j);
        T acc = 0;
        for (int k = 0; k < A.cols; ++k) acc += arow[k] * brow[k];
        out.at(i, j) = acc;
      }
    }
    return push_op(OpKind::MatMulNT, std::move(out), {a, b});
  }

  Id add(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.same_shape(B), "add: shape mismatch");
    Tensor<T> out = A;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
    return push_op(OpKind::Add, std::move(out), {a, b});
  }

  Id add_row(Id a, Id bias) {
    const Tensor<T>&A = val(a), &B = val(bias);
    require(B.rows == 1 && B.cols == A.cols, "add_row: bias must be 1 x cols");
    Tensor<T> out = A;
    for (int i = 0; i < out.rows; ++i) {
      T* r = out.row(i);
      for (int j = 0; j < out.cols; ++j) r[j] += B.data[j];
    }
    return push_op(OpKind::AddRow, std::move(out), {a, bias});
  }

  Id add_const(Id a, const Tensor<T>& c) {
    const Tensor<T>& A = val(a);
    require(A.same_shape(c) || (c.rows >= A.rows && c.cols == A.cols),
            "add_const: constant too small");
    Tensor<T> out = A;
    for (int i = 0; i < out.rows; ++i) {
      T* r = out.row(i);
      const T* cr = c.row(i);
      for (int j = 0; j < out.cols; ++j) r[j] += cr[j];
    }
    return push_op(OpKind::AddConst, std::move(out), {a});
  }

  Id scale(Id a, T s) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v *= s;
    Node n;
    n.kind = OpKind::Scale;
    n.value = std::move(out);
    n.parents = {a};
    n.aux_t = {s};
    n.needs_grad = val_needs_grad(a);
    return push(std::move(n));
  }

  Id relu(Id a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return push_op(OpKind::Relu, std::move(out), {a});
  }

  Id layer_norm(Id x, Id gain, Id bias, T eps = T(1e-5)) {
    const Tensor<T>&X = val(x), &G = val(gain), &B = val(bias);
    require(G.rows == 1 && G.cols == X.cols && B.rows == 1 && B.cols == X.cols,
            "layer_norm: gain/bias must be 1 x cols");
    const int C = X.cols;
    Tensor<T> out(X.rows, C);
    Tensor<T> cache(X.rows, C + 1);  // xhat per col, inv_std in the last slot
    for (int i = 0; i < X.rows; ++i) {
      const T* xr = X.row(i);
      T mean = 0;
      for (int j = 0; j < C; ++j) mean += xr[j];
      mean /= C;
      T var = 0;
      for (int j = 0; j < C; ++j) var += (xr[j] - mean) * (xr[j] - mean);
      var /= C;
      T inv_std = T(1) / std::sqrt(var + eps);
      T* cr = cache.row(i);
      T* orow = out.row(i);
      for (int j = 0; j < C; ++j) {
        T xhat = (xr[j] - mean) * inv_std;
        cr[j] = xhat;
        orow[j] = G.data[j] * xhat + B.data[j];
      }
      cr[C] = inv_std;
    }
    Node n;
    n.kind = OpKind::LayerNorm;
    n.value = std::move(out);
    n.parents = {x, gain, bias};
    n.cache = std::move(cache);
    n.needs_grad = val_needs_grad(x) || val_needs_grad(gain) || val_needs_grad(bias);
    return push(std::move(n));
  }

  Id causal_softmax(Id scores) {
    const Tensor<T>& S = val(scores);
    require(S.rows == S.cols, "causal_softmax: matrix must be square");
    Tensor<T> out(S.rows, S.cols);
    for (int i = 0; i < S.rows; ++i) {
      const T* sr = S.row(i);
      T mx = sr[0];
      for (int j = 1; j <= i; ++j) mx = std::max(mx, sr[j]);
      T denom = 0;
      for (int j = 0; j <= i; ++j) denom += std::exp(sr[j] - mx);
      T* orow = out.row(i);
      for (int j = 0; j <= i; ++j) orow[j] = std::exp(sr[j] - mx) / denom;
      // columns > i stay exactly zero
    }
    return push_op(OpKind::CausalSoftmax, std::move(out), {scores});
  }

  Id slice_rows(Id a, int r0, int r1) {
    const Tensor<T>& A = val(a);
    require(0 <= r0 && r0 < r1 && r1 <= A.rows, "slice_rows: bad range");
    Tensor<T> out(r1 - r0, A.cols);
    for (int i = r0; i < r1; ++i)
      std::copy(A.row(i), A.row(i) + A.cols, out.row(i - r0));
    Node n;
    n.kind = OpKind::SliceRows;
    n.value = std::move(out);
    n.parents = {a};
    n.aux_i = {r0, r1};
    n.needs_grad = val_needs_grad(a);
    return push(std::move(n));
  }

  Id slice_cols(Id a, int c0, int c1) {
    const Tensor<T>& A = val(a);
    require(0 <= c0 && c0 < c1 && c1 <= A.cols, "slice_cols: bad range");
    Tensor<T> out(A.rows, c1 - c0);
    for (int i = 0; i < A.rows; ++i)
      std::copy(A.row(i) + c0, A.row(i) + c1, out.row(i));
    Node n;
    n.kind = OpKind::SliceCols;
    n.value = std::move(out);
    n.parents = {a};
    n.aux_i = {c0, c1};
    n.needs_grad = val_needs_grad(a);
    return push(std::move(n));
  }

  Id concat_rows(const std::vector<Id>& parts) {
    require(!parts.empty(), "concat_rows: empty");
    int rows = 0, cols = val(parts[0]).cols;
    for (Id p : parts) {
      require(val(p).cols == cols, "concat_rows: col mismatch");
      rows += val(p).rows;
    }
    Tensor<T> out(rows, cols);
    int r = 0;
    for (Id p : parts) {
      const Tensor<T>& P = val(p);
      std::copy(P.data.begin(), P.data.end(), out.row(r));
      r += P.rows;
    }
    return push_op(OpKind::ConcatRows, std::move(out), parts);
  }

  Id concat_cols(const std::vector<Id>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    int rows = val(parts[0]).rows, cols = 0;
    for (Id p : parts) {
      require(val(p).rows == rows, "concat_cols: row mismatch");
      cols += val(p).cols;
    }
    Tensor<T> out(rows, cols);
    int c = 0;
    for (Id p : parts) {
      const Tensor<T>& P = val(p);
      for (int i = 0; i < rows; ++i)
        std::copy(P.row(i), P.row(i) + P.cols, out.row(i) + c);
      c += P.cols;
    }
    return push_op(OpKind::ConcatCols, std::move(out), parts);
  }

  Id gather_rows(Id table, const std::vector<int>& rows) {
    const Tensor<T>& A = val(table);
    for (int r : rows) require(0 <= r && r < A.rows, "gather_rows: index out of range");
    Tensor<T> out(static_cast<int>(rows.size()), A.cols);
    for (size_t i = 0; i < rows.size(); ++i)
      std::copy(A.row(rows[i]), A.row(rows[i]) + A.cols, out.row(static_cast<int>(i)));
    Node n;
    n.kind = OpKind::GatherRows;
    n.value = std::move(out);
    n.parents = {table};
    n.aux_i = rows;
    n.needs_grad = val_needs_grad(table);
    return push(std::move(n));
  }

  // Copy of `base` with base[positions[k]] = repl[k].
  Id overwrite_rows(Id base, Id repl, const std::vector<int>& positions) {
    const Tensor<T>&A = val(base), &R = val(repl);
    require(R.cols == A.cols, "overwrite_rows: col mismatch");
    require(static_cast<int>(positions.size()) == R.rows, "overwrite_rows: count mismatch");
    Tensor<T> out = A;
    for (size_t k = 0; k < positions.size(); ++k) {
      int p = positions[k];
      require(0 <= p && p < A.rows, "overwrite_rows: position out of range");
      std::copy(R.row(static_cast<int>(k)), R.row(static_cast<int>(k)) + R.cols, out.row(p));
    }
    Node n;
    n.kind = OpKind::OverwriteRows;
    n.value = std::move(out);
    n.parents = {base, repl};
    n.aux_i = positions;
    n.needs_grad = val_needs_grad(base) || val_needs_grad(repl);
    return push(std::move(n));
  }

  // Weighted sum over rows of -log softmax(logits_i)[target_i]; target -1
  // skips the row. Returns a 1x1 node.
  Id cross_entropy_sum(Id logits, const std::vector<int>& targets, const std::vector<T>& weights) {
    const Tensor<T>& L = val(logits);
    require(static_cast<int>(targets.size()) == L.rows, "cross_entropy: target count mismatch");
    require(weights.size() == targets.size(), "cross_entropy: weight count mismatch");
    Tensor<T> probs(L.rows, L.cols);
    T loss = 0;
    for (int i = 0; i < L.rows; ++i) {
      if (targets[i] < 0) continue;
      require(targets[i] < L.cols, "cross_entropy: target out of range");
      const T* lr = L.row(i);
      T mx = lr[0];
      for (int j = 1; j < L.cols; ++j) mx = std::max(mx, lr[j]);
      T denom = 0;
      for (int j = 0; j < L.cols; ++j) denom += std::exp(lr[j] - mx);
      T* pr = probs.row(i);
      for (int j = 0; j < L.cols; ++j) pr[j] = std::exp(lr[j] - mx) / denom;
      loss += weights[i] * -std::log(std::max(pr[targets[i]], std::numeric_limits<T>::min()));
    }
    Tensor<T> out(1, 1);
    out.data[0] = loss;
    Node n;
    n.kind = OpKind::CrossEntropySum;
    n.value = std::move(out);
    n.parents = {logits};
    n.aux_i = targets;
    n.aux_t = weights;
    n.cache = std::move(probs);
    n.needs_grad = val_needs_grad(logits);
    return push(std::move(n));
  }

  Id add_scalars(const std::vector<Id>& parts) {
    require(!parts.empty(), "add_scalars: empty");
    Tensor<T> out(1, 1);
    for (Id p : parts) {
      require(val(p).rows == 1 && val(p).cols == 1, "add_scalars: non-scalar part");
      out.data[0] += val(p).data[0];
    }
    return push_op(OpKind::AddScalars, std::move(out), parts);
  }

  const Tensor<T>& value(Id id) const { return nodes_[id].value; }
  const Tensor<T>& gradient(Id id) const { return nodes_[id].grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // Reverse sweep from a 1x1 loss node; accumulates into Parameter::grad.
  void backward(Id loss) {
    require(val(loss).rows == 1 && val(loss).cols == 1, "backward: loss must be scalar");
    for (auto& n : nodes_) n.grad = Tensor<T>();
    ensure_grad(loss);
    nodes_[loss].grad.data[0] = T(1);

    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      switch (n.kind) {
        case OpKind::Input:
          break;
        case OpKind::Param:
          for (size_t i = 0; i < n.grad.size(); ++i) n.param->grad.data[i] += n.grad.data[i];
          break;
        case OpKind::MatMul: {
          Node&A = nodes_[n.parents[0]], &B = nodes_[n.parents[1]];
          if (A.needs_grad) {
            ensure_grad(n.parents[0]);
            // dA = dC * B^T
            for (int i = 0; i < A.value.rows; ++i)
              for (int k = 0; k < A.value.cols; ++k) {
                const T* brow = B.value.row(k);
                const T* grow = n.grad.row(i);
                T acc = 0;
                for (int j = 0; j < B.value.cols; ++j) acc += grow[j] * brow[j];
                A.grad.at(i, k) += acc;
              }
          }
          if (B.needs_grad) {
            ensure_grad(n.parents[1]);
            // dB = A^T * dC
            for (int i = 0; i < A.value.rows; ++i) {
              const T* arow = A.value.row(i);
              const T* grow = n.grad.row(i);
              for (int k = 0; k < A.value.cols; ++k) {
                T av = arow[k];
                if (av == T(0)) continue;
                T* bg = B.grad.row(k);
                for (int j = 0; j < B.value.cols; ++j) bg[j] += av * grow[j];
              }
            }
          }
          break;
        }
        case OpKind::MatMulNT: {
          Node&A = nodes_[n.parents[0]], &B = nodes_[n.parents[1]];
          if (A.needs_grad) {
            ensure_grad(n.parents[0]);
            // dA = dC * B
            for (int i = 0; i < A.value.rows; ++i) {
              const T* grow = n.grad.row(i);
              T* ag = A.grad.row(i);
              for (int j = 0; j < B.value.rows; ++j) {
                T gv = grow[j];
                if (gv == T(0)) continue;
                const T* brow = B.value.row(j);
                for (int k = 0; k < B.value.cols; ++k) ag[k] += gv * brow[k];
              }
            }
          }
          if (B.needs_grad) {
            ensure_grad(n.parents[1]);
            // dB = dC^T * A
            for (int i = 0; i < A.value.rows; ++i) {
              const T* grow = n.grad.row(i);
              const T* arow = A.value.row(i);
              for (int j = 0; j < B.value.rows; ++j) {
                T gv = grow[j];
                if (gv == T(0)) continue;
                T* bg = B.grad.row(j);
                for (int k = 0; k < B.value.cols; ++k) bg[k] += gv * arow[k];
              }
            }
          }
          break;
        }
        case OpKind::Add:
          for (int p = 0; p < 2; ++p)
            if (nodes_[n.parents[p]].needs_grad) {
              ensure_grad(n.parents[p]);
              Tensor<T>& pg = nodes_[n.parents[p]].grad;
              for (size_t i = 0; i < pg.size(); ++i) pg.data[i] += n.grad.data[i];
            }
          break;
        case OpKind::AddRow: {
          Node& A = nodes_[n.parents[0]];
          if (A.needs_grad) {
            ensure_grad(n.parents[0]);
            for (size_t i = 0; i < A.grad.size(); ++i) A.grad.data[i] += n.grad.data[i];
          }
          Node& B = nodes_[n.parents[1]];
          if (B.needs_grad) {
            ensure_grad(n.parents[1]);
            for (int i = 0; i < n.grad.rows; ++i) {
              const T* grow = n.grad.row(i);
              for (int j = 0; j < n.grad.cols; ++j) B.grad.data[j] += grow[j];
            }
          }
          break;
        }
        case OpKind::AddConst:
        case OpKind::Relu:
        case OpKind::Scale: {
          Node& A = nodes_[n.parents[0]];
          if (!A.needs_grad) break;
          ensure_grad(n.parents[0]);
          if (n.kind == OpKind::AddConst) {
            for (size_t i = 0; i < A.grad.size(); ++i) A.grad.data[i] += n.grad.data[i];
          } else if (n.kind == OpKind::Relu) {
            for (size_t i = 0; i < A.grad.size(); ++i)
              if (A.value.data[i] > T(0)) A.grad.data[i] += n.grad.data[i];
          } else {
            for (size_t i = 0; i < A.grad.size(); ++i) A.grad.data[i] += n.aux_t[0] * n.grad.data[i];
          }
          break;
        }
        case OpKind::LayerNorm: {
          Node&X = nodes_[n.parents[0]], &G = nodes_[n.parents[1]], &B = nodes_[n.parents[2]];
          const int C = X.value.cols;
          if (G.needs_grad) ensure_grad(n.parents[1]);
          if (B.needs_grad) ensure_grad(n.parents[2]);
          if (X.needs_grad) ensure_grad(n.parents[0]);
          for (int i = 0; i < X.value.rows; ++i) {
            const T* dy = n.grad.row(i);
            const T* cr = n.cache.row(i);
            T inv_std = cr[C];
            if (G.needs_grad)
              for (int j = 0; j < C; ++j) G.grad.data[j] += dy[j] * cr[j];
            if (B.needs_grad)
              for (int j = 0; j < C; ++j) B.grad.data[j] += dy[j];
            if (X.needs_grad) {
              // dx = inv_std * (g*dy - mean(g*dy) - xhat * mean(g*dy*xhat))
              T m1 = 0, m2 = 0;
              for (int j = 0; j < C; ++j) {
                T gd = G.value.data[j] * dy[j];
                m1 += gd;
                m2 += gd * cr[j];
              }
              m1 /= C;
              m2 /= C;
              T* xg = X.grad.row(i);
              for (int j = 0; j < C; ++j)
                xg[j] += inv_std * (G.value.data[j] * dy[j] - m1 - cr[j] * m2);
            }
          }
          break;
        }
        case OpKind::CausalSoftmax: {
          Node& A = nodes_[n.parents[0]];
          if (!A.needs_grad) break;
          ensure_grad(n.parents[0]);
          for (int i = 0; i < n.value.rows; ++i) {
            const T* p = n.value.row(i);
            const T* dy = n.grad.row(i);
            T dot = 0;
            for (int j = 0; j <= i; ++j) dot += dy[j] * p[j];
            T* ag = A.grad.row(i);
            for (int j = 0; j <= i; ++j) ag[j] += p[j] * (dy[j] - dot);
          }
          break;
        }
        case OpKind::SliceRows: {
          Node& A = nodes_[n.parents[0]];
          if (!A.needs_grad) break;
          ensure_grad(n.parents[0]);
          for (int i = 0; i < n.value.rows; ++i) {
            const T* grow = n.grad.row(i);
            T* ag = A.grad.row(n.aux_i[0] + i);
            for (int j = 0; j < n.value.cols; ++j) ag[j] += grow[j];
          }
          break;
        }
        case OpKind::SliceCols: {
          Node& A = nodes_[n.parents[0]];
          if (!A.needs_grad) break;
          ensure_grad(n.parents[0]);
          for (int i = 0; i < n.value.rows; ++i) {
            const T* grow = n.grad.row(i);
            T* ag = A.grad.row(i) + n.aux_i[0];
            for (int j = 0; j < n.value.cols; ++j) ag[j] += grow[j];
          }
          break;
        }
        case OpKind::ConcatRows: {
          int r = 0;
          for (Id pid : n.parents) {
            Node& P = nodes_[pid];
            if (P.needs_grad) {
              ensure_grad(pid);
              for (int i = 0; i < P.value.rows; ++i) {
                const T* grow = n.grad.row(r + i);
                T* pg = P.grad.row(i);
                for (int j = 0; j < P.value.cols; ++j) pg[j] += grow[j];
              }
            }
            r += P.value.rows;
          }
          break;
        }
        case OpKind::ConcatCols: {
          int c = 0;
          for (Id pid : n.parents) {
            Node& P = nodes_[pid];
            if (P.needs_grad) {
              ensure_grad(pid);
              for (int i = 0; i < P.value.rows; ++i) {
                const T* grow = n.grad.row(i) + c;
                T* pg = P.grad.row(i);
                for (int j = 0; j < P.value.cols; ++j) pg[j] += grow[j];
              }
            }
            c += P.value.cols;
          }
          break;
        }
        case OpKind::GatherRows: {
          Node& A = nodes_[n.parents[0]];
          if (!A.needs_grad) break;
          ensure_grad(n.parents[0]);
          for (size_t k = 0; k < n.aux_i.size(); ++k) {
            const T* grow = n.grad.row(static_cast<int>(k));
            T* ag = A.grad.row(n.aux_i[k]);
            for (int j = 0; j < n.value.cols; ++j) ag[j] += grow[j];
          }
          break;
        }
        case OpKind::OverwriteRows: {
          Node&A = nodes_[n.parents[0]], &R = nodes_[n.parents[1]];
          std::vector<char> replaced(A.value.rows, 0);
          for (int p : n.aux_i) replaced[p] = 1;
          if (A.needs_grad) {
            ensure_grad(n.parents[0]);
            for (int i = 0; i < A.value.rows; ++i) {
              if (replaced[i]) continue;
              const T* grow = n.grad.row(i);
              T* ag = A.grad.row(i);
              for (int j = 0; j < A.value.cols; ++j) ag[j] += grow[j];
            }
          }
          if (R.needs_grad) {
            ensure_grad(n.parents[1]);
            for (size_t k = 0; k < n.aux_i.size(); ++k) {
              const T* grow = n.grad.row(n.aux_i[k]);
              T* rg = R.grad.row(static_cast<int>(k));
              for (int j = 0; j < R.value.cols; ++j) rg[j] += grow[j];
            }
          }
          break;
        }
        case OpKind::CrossEntropySum: {
          Node& L = nodes_[n.parents[0]];
          if (!L.needs_grad) break;
          ensure_grad(n.parents[0]);
          T up = n.grad.data[0];
          for (size_t i = 0; i < n.aux_i.size(); ++i) {
            int t = n.aux_i[i];
            if (t < 0) continue;
            const T* pr = n.cache.row(static_cast<int>(i));
            T* lg = L.grad.row(static_cast<int>(i));
            T w = up * n.aux_t[i];
            for (int j = 0; j < L.value.cols; ++j) lg[j] += w * pr[j];
            lg[t] -= w;
          }
          break;
        }
        case OpKind::AddScalars:
          for (Id pid : n.parents)
            if (nodes_[pid].needs_grad) {
              ensure_grad(pid);
              nodes_[pid].grad.data[0] += n.grad.data[0];
            }
          break;
      }
    }
  }

 private:
  std::vector<Node> nodes_;

  static void require(bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
  }

  bool val_needs_grad(Id id) const { return nodes_[id].needs_grad; }
  const Tensor<T>& val(Id id) const { return nodes_[id].value; }

  void ensure_grad(Id id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Tensor<T>(n.value.rows, n.value.cols);
  }

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Id push_op(OpKind kind, Tensor<T> value, std::vector<Id> parents) {
    Node n;
    n.kind = kind;
    n.value = std::move(value);
    n.needs_grad = false;
    for (Id p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
    n.parents = std::move(parents);
    return push(std::move(n));
  }
};

}  // namespace hat
