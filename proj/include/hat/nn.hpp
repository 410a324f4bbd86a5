// Transformer building blocks on top of the tape: sinusoidal positions,
// multi-head causal self-attention, post-LN blocks, parameter containers
// with deterministic initialization, and the finite-difference gradient
// checker used as the autodiff oracle in tests.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hat/tape.hpp"

namespace hat {

template <typename T>
Tensor<T> positional_encoding(int length, int dim) {
  if (length < 1) throw ValidationError("positional_encoding: length must be >= 1");
  if (dim < 2 || dim % 2 != 0) throw ValidationError("positional_encoding: dim must be even");
  Tensor<T> pe(length, dim);
  for (int p = 0; p < length; ++p)
    for (int i = 0; i < dim / 2; ++i) {
      double angle = p / std::pow(10000.0, (2.0 * i) / dim);
      pe.at(p, 2 * i) = static_cast<T>(std::sin(angle));
      pe.at(p, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  return pe;
}

// One post-LN transformer layer: x = LN1(x + MHA(x)); x = LN2(x + FFN(x)).
template <typename T>
struct BlockParams {
  Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter<T> ln1_g, ln1_b, ln2_g, ln2_b;
  Parameter<T> w1, b1, w2, b2;

  template <typename F>
  void visit(F&& f) {
    f(wq); f(bq); f(wk); f(bk); f(wv); f(bv); f(wo); f(bo);
    f(ln1_g); f(ln1_b); f(ln2_g); f(ln2_b);
    f(w1); f(b1); f(w2); f(b2);
  }
};

template <typename T>
struct StackParams {
  int dim = 0;
  int heads = 0;
  std::vector<BlockParams<T>> layers;

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers) l.visit(f);
  }
};

constexpr double kInitStddev = 0.02;

template <typename T>
void init_linear(Parameter<T>& w, Parameter<T>& b, const std::string& name, int in, int out,
                 Rng& rng) {
  w = Parameter<T>(name + ".w", in, out);
  b = Parameter<T>(name + ".b", 1, out);
  fill_normal(w.value, rng, kInitStddev);
}

template <typename T>
void init_stack(StackParams<T>& s, const std::string& prefix, int dim, int heads, int n_layers,
                Rng& rng) {
  if (n_layers > 0 && (heads < 1 || dim % heads != 0))
    throw ValidationError("init_stack: dim must be divisible by heads");
  s.dim = dim;
  s.heads = heads;
  s.layers.resize(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    BlockParams<T>& p = s.layers[l];
    std::string base = prefix + ".layer" + std::to_string(l);
    init_linear(p.wq, p.bq, base + ".attn.q", dim, dim, rng);
    init_linear(p.wk, p.bk, base + ".attn.k", dim, dim, rng);
    init_linear(p.wv, p.bv, base + ".attn.v", dim, dim, rng);
    init_linear(p.wo, p.bo, base + ".attn.o", dim, dim, rng);
    init_linear(p.w1, p.b1, base + ".ffn.1", dim, 4 * dim, rng);
    init_linear(p.w2, p.b2, base + ".ffn.2", 4 * dim, dim, rng);
    auto ln = [&](Parameter<T>& g, Parameter<T>& b, const std::string& nm) {
      g = Parameter<T>(nm + ".g", 1, dim);
      b = Parameter<T>(nm + ".b", 1, dim);
      std::fill(g.value.data.begin(), g.value.data.end(), T(1));
    };
    ln(p.ln1_g, p.ln1_b, base + ".ln1");
    ln(p.ln2_g, p.ln2_b, base + ".ln2");
  }
}

template <typename T>
typename Tape<T>::Id linear(Tape<T>& tp, typename Tape<T>::Id x, Parameter<T>& w,
                            Parameter<T>& b) {
  return tp.add_row(tp.matmul(x, tp.param(w)), tp.param(b));
}

template <typename T>
typename Tape<T>::Id causal_attention(Tape<T>& tp, typename Tape<T>::Id x, BlockParams<T>& p,
                                      int heads) {
  using Id = typename Tape<T>::Id;
  const int dim = tp.value(x).cols;
  if (heads < 1 || dim % heads != 0)
    throw ValidationError("causal_attention: dim must be divisible by heads");
  const int dh = dim / heads;
  Id q = linear(tp, x, p.wq, p.bq);
  Id k = linear(tp, x, p.wk, p.bk);
  Id v = linear(tp, x, p.wv, p.bv);
  std::vector<Id> outs;
  outs.reserve(heads);
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  for (int h = 0; h < heads; ++h) {
    Id qh = tp.slice_cols(q, h * dh, (h + 1) * dh);
    Id kh = tp.slice_cols(k, h * dh, (h + 1) * dh);
    Id vh = tp.slice_cols(v, h * dh, (h + 1) * dh);
    Id probs = tp.causal_softmax(tp.scale(tp.matmul_nt(qh, kh), inv_sqrt));
    outs.push_back(tp.matmul(probs, vh));
  }
  return linear(tp, tp.concat_cols(outs), p.wo, p.bo);
}

template <typename T>
typename Tape<T>::Id transformer_block(Tape<T>& tp, typename Tape<T>::Id x, BlockParams<T>& p,
                                       int heads) {
  using Id = typename Tape<T>::Id;
  Id a = causal_attention(tp, x, p, heads);
  Id x1 = tp.layer_norm(tp.add(x, a), tp.param(p.ln1_g), tp.param(p.ln1_b));
  Id f = linear(tp, tp.relu(linear(tp, x1, p.w1, p.b1)), p.w2, p.b2);
  return tp.layer_norm(tp.add(x1, f), tp.param(p.ln2_g), tp.param(p.ln2_b));
}

// Zero layers is the identity, which is what the ablation variants rely on.
template <typename T>
typename Tape<T>::Id transformer_stack(Tape<T>& tp, typename Tape<T>::Id x, StackParams<T>& s) {
  auto cur = x;
  for (auto& l : s.layers) cur = transformer_block(tp, cur, l, s.heads);
  return cur;
}

// --- Finite-difference oracle -------------------------------------------------

// Compares reverse-mode gradients against central differences for every
// entry of every listed parameter (or a seeded sample of max_per_param
// entries when positive). `build` must construct the scalar loss on a fresh
// tape; it runs many times, so keep the model tiny.
//
// Entries whose gradient magnitude sits below `floor` are held to the
// absolute tolerance tol*floor instead of a relative one: central
// differences on an O(1) loss carry ~1e-10 of cancellation noise at
// eps=1e-5, which would swamp the relative error of near-zero gradients.
template <typename BuildFn>
double grad_check(const std::vector<Parameter<double>*>& params, BuildFn&& build,
                  double eps = 1e-5, int max_per_param = 0, uint64_t seed = 1,
                  double floor = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tp;
    auto loss = build(tp);
    tp.backward(loss);
  }
  auto eval = [&]() {
    Tape<double> tp;
    auto loss = build(tp);
    return tp.value(loss).data[0];
  };
  Rng rng(seed);
  double max_rel = 0;
  for (auto* p : params) {
    const size_t n = p->value.size();
    std::vector<size_t> entries;
    if (max_per_param <= 0 || n <= static_cast<size_t>(max_per_param)) {
      entries.resize(n);
      for (size_t i = 0; i < n; ++i) entries[i] = i;
    } else {
      for (int i = 0; i < max_per_param; ++i) entries.push_back(rng.uniform_int(n));
    }
    for (size_t i : entries) {
      double old = p->value.data[i];
      p->value.data[i] = old + eps;
      double f1 = eval();
      p->value.data[i] = old - eps;
      double f2 = eval();
      p->value.data[i] = old;
      double numeric = (f1 - f2) / (2 * eps);
      double analytic = p->grad.data[i];
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), floor});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace hat
