#pragma once
// The HAT model: per-category token embeddings, a bottom song transformer,
// the hierarchical structure enhancement (HSE) pass that rewrites phrase and
// chord rows with texture/form context, a top song transformer, the
// two-stage prediction heads, and the weighted cross-entropy loss.
//
// Every forward here is built on the tape so the same code path serves
// training (backward) and generation (values only). All attention is causal,
// which gives the defining property of the whole stack: the output row at
// position i never depends on tokens after i, even through the HSE rewiring
// (phrase rows mix in only the *previous* phrase's form output, chord rows
// only the *previous* chord's texture output).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hat/nn.hpp"
#include "hat/sampling.hpp"
#include "hat/tokenize.hpp"

namespace hat {

// --- Configuration -------------------------------------------------------------

enum class Variant : int {
  Base = 0,      // HSE disabled entirely
  WithForm,      // phrase rows only: form transformer over the phrase rows
  WithTexture,   // chord rows only: one texture pass over all chords
  Full,          // per-phrase texture passes + form pass + both row updates
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::WithForm: return "form";
    case Variant::WithTexture: return "texture";
    case Variant::Full: return "full";
  }
  throw ValidationError("unknown variant");
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "base") return Variant::Base;
  if (s == "form") return Variant::WithForm;
  if (s == "texture") return Variant::WithTexture;
  if (s == "full") return Variant::Full;
  throw ValidationError("unknown variant '" + s + "' (expected base|form|texture|full)");
}

// Defaults are the desk scale used throughout the tests: same topology as the
// full-size setup, one eighth the width and shallower stacks. paper_scale()
// gives the big one.
struct HATConfig {
  int dim = 64;  // width of every transformer and of the concatenated embedding

  // Embedding width per token category, in Category order; must sum to dim.
  // High-cardinality categories get the wider slices.
  std::array<int, kNumCategories> emb_dims = {8, 8, 8, 4, 8, 12, 4, 8, 4};

  int song_layers = 2, song_heads = 4;        // bottom and top stacks
  int texture_layers = 2, texture_heads = 2;  // per-phrase chord stack
  int form_layers = 2, form_heads = 2;        // cross-phrase stack

  int max_song_len = 512;      // token window of the song transformers
  int max_phrase_chords = 60;  // texture transformer window
  int max_phrases = 30;        // form transformer window

  // Per-category loss weights: structure-bearing categories count extra.
  std::array<double, kNumCategories> loss_weights = {5, 5, 1, 10, 10, 1, 1, 1, 1};

  Variant variant = Variant::Full;

  // Per-category sampling knobs (temperature, nucleus mass).
  std::array<SamplingParams, kNumCategories> sampling = {{
      {1.0, 0.9},   // Type
      {1.2, 0.9},   // Bar
      {1.2, 0.9},   // Beat
      {1.2, 0.9},   // Tempo
      {1.0, 0.99},  // Phrase
      {1.0, 0.99},  // Chord
      {1.0, 0.9},   // Track
      {1.0, 0.9},   // Pitch
      {2.0, 0.9},   // Duration
  }};

  uint64_t seed = 1;

  bool operator==(const HATConfig&) const = default;

  void validate() const {
    if (dim < 2) throw ValidationError("config: dim must be >= 2");
    int sum = 0;
    for (int d : emb_dims) {
      if (d < 1) throw ValidationError("config: every embedding dim must be >= 1");
      sum += d;
    }
    if (sum != dim) throw ValidationError("config: embedding dims must sum to dim");
    auto stack = [](int layers, int heads, int dim, const char* what) {
      if (layers < 0) throw ValidationError(std::string("config: ") + what + " layers < 0");
      if (heads < 1 || dim % heads != 0)
        throw ValidationError(std::string("config: ") + what + " heads must divide dim");
    };
    stack(song_layers, song_heads, dim, "song");
    stack(texture_layers, texture_heads, dim, "texture");
    stack(form_layers, form_heads, dim, "form");
    if (max_song_len < 2 || max_phrase_chords < 1 || max_phrases < 1)
      throw ValidationError("config: max lengths too small");
    for (double w : loss_weights)
      if (!(w > 0)) throw ValidationError("config: loss weights must be positive");
    for (const auto& s : sampling) {
      if (!(s.temperature > 0)) throw ValidationError("config: temperature must be positive");
      if (!(s.top_p > 0) || s.top_p > 1.0)
        throw ValidationError("config: top_p must lie in (0, 1]");
    }
  }

  static HATConfig paper_scale() {
    HATConfig c;
    c.dim = 512;
    c.emb_dims = {64, 64, 64, 32, 64, 96, 32, 64, 32};
    c.song_layers = 6;
    c.song_heads = 8;
    c.texture_layers = 6;
    c.texture_heads = 4;
    c.form_layers = 12;
    c.form_heads = 8;
    c.max_song_len = 2560;
    c.max_phrase_chords = 60;
    c.max_phrases = 30;
    return c;
  }
};

// --- Parameters ----------------------------------------------------------------

template <typename T>
struct MlpParams {
  Parameter<T> w1, b1, w2, b2;

  template <typename F>
  void visit(F&& f) {
    f(w1); f(b1); f(w2); f(b2);
  }
};

template <typename T>
void init_mlp(MlpParams<T>& m, const std::string& name, int in, int hidden, int out, Rng& rng) {
  init_linear(m.w1, m.b1, name + ".1", in, hidden, rng);
  init_linear(m.w2, m.b2, name + ".2", hidden, out, rng);
}

template <typename T>
typename Tape<T>::Id mlp_forward(Tape<T>& tp, typename Tape<T>::Id x, MlpParams<T>& m) {
  return linear(tp, tp.relu(linear(tp, x, m.w1, m.b1)), m.w2, m.b2);
}

// All trainable state. Every stack is allocated regardless of variant so a
// checkpoint keeps its shape when the variant flag changes.
template <typename T>
struct HATParameters {
  std::array<Parameter<T>, kNumCategories> emb;  // one table per category
  Parameter<T> type_emb;                         // stage-two head injection table
  StackParams<T> bottom, texture, form, top;
  MlpParams<T> head_tp;                               // type head
  std::array<MlpParams<T>, kNumCategories - 1> head;  // Bar..Duration heads

  template <typename F>
  void visit(F&& f) {
    for (auto& e : emb) f(e);
    f(type_emb);
    bottom.visit(f);
    texture.visit(f);
    form.visit(f);
    top.visit(f);
    head_tp.visit(f);
    for (auto& h : head) h.visit(f);
  }
};

template <typename T>
HATParameters<T> init_hat(const HATConfig& cfg, const Vocabulary& vocab, Rng& rng) {
  cfg.validate();
  HATParameters<T> P;
  for (int c = 0; c < kNumCategories; ++c) {
    Category cat = static_cast<Category>(c);
    P.emb[c] = Parameter<T>(std::string("emb.") + category_name(cat), vocab.size(cat),
                            cfg.emb_dims[c]);
    fill_normal(P.emb[c].value, rng, T(kInitStddev));
  }
  P.type_emb = Parameter<T>("head.type_emb", kNumTokenTypes, cfg.emb_dims[0]);
  fill_normal(P.type_emb.value, rng, T(kInitStddev));
  init_stack(P.bottom, "bottom", cfg.dim, cfg.song_heads, cfg.song_layers, rng);
  init_stack(P.texture, "texture", cfg.dim, cfg.texture_heads, cfg.texture_layers, rng);
  init_stack(P.form, "form", cfg.dim, cfg.form_heads, cfg.form_layers, rng);
  init_stack(P.top, "top", cfg.dim, cfg.song_heads, cfg.song_layers, rng);
  init_mlp(P.head_tp, "head.type", cfg.dim, cfg.dim, kNumTokenTypes, rng);
  for (int c = 1; c < kNumCategories; ++c) {
    Category cat = static_cast<Category>(c);
    init_mlp(P.head[c - 1], std::string("head.") + category_name(cat),
             cfg.dim + cfg.emb_dims[0], cfg.dim, vocab.size(cat), rng);
  }
  return P;
}

template <typename T>
std::vector<Parameter<T>*> all_params(HATParameters<T>& P) {
  std::vector<Parameter<T>*> out;
  P.visit([&](Parameter<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T>
size_t count_values(HATParameters<T>& P) {
  size_t n = 0;
  P.visit([&](Parameter<T>& p) { n += p.value.size(); });
  return n;
}

template <typename T>
void zero_grads(HATParameters<T>& P) {
  P.visit([](Parameter<T>& p) { p.zero_grad(); });
}

template <typename T>
bool params_finite(HATParameters<T>& P) {
  bool ok = true;
  P.visit([&](Parameter<T>& p) { ok = ok && all_finite(p.value); });
  return ok;
}

// --- Embedding -----------------------------------------------------------------

// Each token row is the concatenation of its nine category embeddings, so the
// output width is exactly cfg.dim. Index validation happens in the vocabulary.
template <typename T>
typename Tape<T>::Id embed_tokens(Tape<T>& tp, HATParameters<T>& P, const Vocabulary& vocab,
                                  const TokenSeq& toks) {
  using Id = typename Tape<T>::Id;
  if (toks.empty()) throw ValidationError("embed_tokens: empty sequence");
  std::vector<std::vector<int>> idx(kNumCategories, std::vector<int>(toks.size()));
  for (size_t i = 0; i < toks.size(); ++i) {
    std::array<int, kNumCategories> enc = vocab.encode(toks[i]);
    for (int c = 0; c < kNumCategories; ++c) idx[c][i] = enc[c];
  }
  std::vector<Id> slices;
  slices.reserve(kNumCategories);
  for (int c = 0; c < kNumCategories; ++c)
    slices.push_back(tp.gather_rows(tp.param(P.emb[c]), idx[c]));
  return tp.concat_cols(slices);
}

// --- Song transformers ---------------------------------------------------------

namespace detail {

template <typename T>
typename Tape<T>::Id song_forward(Tape<T>& tp, typename Tape<T>::Id x, StackParams<T>& stack,
                                  const HATConfig& cfg, const char* which) {
  int rows = tp.value(x).rows;
  if (rows > cfg.max_song_len)
    throw ValidationError(std::string(which) + ": sequence length " + std::to_string(rows) +
                          " exceeds window " + std::to_string(cfg.max_song_len));
  return transformer_stack(tp, tp.add_const(x, positional_encoding<T>(rows, cfg.dim)), stack);
}

}  // namespace detail

template <typename T>
typename Tape<T>::Id bottom_song_forward(Tape<T>& tp, HATParameters<T>& P, const HATConfig& cfg,
                                         typename Tape<T>::Id E) {
  return detail::song_forward(tp, E, P.bottom, cfg, "bottom song transformer");
}

template <typename T>
typename Tape<T>::Id top_song_forward(Tape<T>& tp, HATParameters<T>& P, const HATConfig& cfg,
                                      typename Tape<T>::Id S) {
  return detail::song_forward(tp, S, P.top, cfg, "top song transformer");
}

// --- Hierarchical structure enhancement ----------------------------------------

// Positions of the structural tokens, grouped the way the recurrent generator
// sees them: a chord belongs to the most recent phrase token in stream order.
// Chords before the first phrase token have no anchor and pass through HSE
// unchanged.
struct HseGroups {
  struct PhraseGroup {
    int phrase_pos = -1;
    std::vector<int> chord_pos;
  };
  std::vector<int> pre_chords;
  std::vector<PhraseGroup> phrases;
};

inline HseGroups hse_groups(const TokenSeq& toks) {
  HseGroups g;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].type == TokenType::Phrase) {
      g.phrases.push_back({static_cast<int>(i), {}});
    } else if (toks[i].type == TokenType::Chord) {
      if (g.phrases.empty())
        g.pre_chords.push_back(static_cast<int>(i));
      else
        g.phrases.back().chord_pos.push_back(static_cast<int>(i));
    }
  }
  return g;
}

// Counters for asserting which sub-passes ran under each variant.
struct HseTrace {
  int texture_passes = 0;
  int form_passes = 0;
  int phrase_rows_updated = 0;
  int chord_rows_updated = 0;
};

// Rewrites phrase and chord rows of S according to the active variant and
// returns the enhanced matrix; every other row passes through bit-identical.
//
//   texture (per phrase):  [T_1..T_n] = Texture(PosEnc(S_phrase + chord rows))
//   form:                  [TF_1..TF_m] = Form(PosEnc([T of each phrase]))
//   phrase row i > 1:      S'_p = TF_{i-1} + S_p          (first phrase kept)
//   chord row j of phrase: S'_c = S'_p + S_c              (j = 1)
//                          S'_c = (S'_p + T_{j-1}) + S_c  (j > 1)
//
// The add order is pinned because the incremental generator must reproduce
// these rows bit for bit. A phrase with no chords contributes a zero texture
// row so phrase numbering inside the form pass stays aligned.
template <typename T>
typename Tape<T>::Id hse_forward(Tape<T>& tp, HATParameters<T>& P, const HATConfig& cfg,
                                 typename Tape<T>::Id S, const HseGroups& g,
                                 HseTrace* trace = nullptr) {
  using Id = typename Tape<T>::Id;
  HseTrace local;
  HseTrace& tr = trace ? *trace : local;
  tr = HseTrace{};
  if (cfg.variant == Variant::Base || g.phrases.empty()) return S;

  const int dim = cfg.dim;
  const int n_ph = static_cast<int>(g.phrases.size());
  const bool use_texture = cfg.variant == Variant::Full || cfg.variant == Variant::WithTexture;
  const bool use_form = cfg.variant == Variant::Full || cfg.variant == Variant::WithForm;

  // Texture pass(es). tex[i] ends up with one output row per chord of phrase
  // i, or -1 when the phrase has no chords (or texture is off).
  std::vector<Id> tex(n_ph, Id(-1));
  if (use_texture && cfg.variant == Variant::Full) {
    for (int i = 0; i < n_ph; ++i) {
      const auto& ph = g.phrases[i];
      int n_ch = static_cast<int>(ph.chord_pos.size());
      if (n_ch == 0) continue;
      if (n_ch > cfg.max_phrase_chords)
        throw ValidationError("texture transformer: phrase has " + std::to_string(n_ch) +
                              " chords, window is " + std::to_string(cfg.max_phrase_chords));
      Id cp = tp.gather_rows(S, ph.chord_pos);
      Id sp = tp.slice_rows(S, ph.phrase_pos, ph.phrase_pos + 1);
      Id x = tp.add_const(tp.add_row(cp, sp), positional_encoding<T>(n_ch, dim));
      tex[i] = transformer_stack(tp, x, P.texture);
      ++tr.texture_passes;
    }
  } else if (use_texture) {
    // Texture-only ablation: every in-phrase chord in one pass, no phrase-row
    // addition (there is no single anchoring phrase).
    std::vector<int> all_chords;
    for (const auto& ph : g.phrases)
      all_chords.insert(all_chords.end(), ph.chord_pos.begin(), ph.chord_pos.end());
    if (!all_chords.empty()) {
      int n_ch = static_cast<int>(all_chords.size());
      if (n_ch > cfg.max_phrase_chords)
        throw ValidationError("texture transformer: " + std::to_string(n_ch) +
                              " chords exceed window " + std::to_string(cfg.max_phrase_chords));
      Id out = transformer_stack(
          tp, tp.add_const(tp.gather_rows(S, all_chords), positional_encoding<T>(n_ch, dim)),
          P.texture);
      ++tr.texture_passes;
      int off = 0;
      for (int i = 0; i < n_ph; ++i) {
        int n = static_cast<int>(g.phrases[i].chord_pos.size());
        if (n > 0) tex[i] = tp.slice_rows(out, off, off + n);
        off += n;
      }
    }
  }

  // Form pass over one row per phrase: the texture output at the phrase's
  // last chord at full scale, the raw phrase row in the form-only ablation.
  Id form_out = -1;
  if (use_form) {
    if (n_ph > cfg.max_phrases)
      throw ValidationError("form transformer: " + std::to_string(n_ph) +
                            " phrases exceed window " + std::to_string(cfg.max_phrases));
    Id form_in;
    if (cfg.variant == Variant::Full) {
      std::vector<Id> rows;
      rows.reserve(n_ph);
      for (int i = 0; i < n_ph; ++i) {
        if (tex[i] < 0) {
          rows.push_back(tp.input(Tensor<T>(1, dim)));  // chordless phrase: zero texture
        } else {
          int last = tp.value(tex[i]).rows - 1;
          rows.push_back(tp.slice_rows(tex[i], last, last + 1));
        }
      }
      form_in = tp.concat_rows(rows);
    } else {
      std::vector<int> ppos;
      ppos.reserve(n_ph);
      for (const auto& ph : g.phrases) ppos.push_back(ph.phrase_pos);
      form_in = tp.gather_rows(S, ppos);
    }
    form_out = transformer_stack(
        tp, tp.add_const(form_in, positional_encoding<T>(n_ph, dim)), P.form);
    ++tr.form_passes;
  }

  // Row updates, assembled in stream order (phrase token precedes its chords).
  std::vector<int> positions;
  std::vector<Id> rows;
  for (int i = 0; i < n_ph; ++i) {
    const auto& ph = g.phrases[i];
    Id sp = tp.slice_rows(S, ph.phrase_pos, ph.phrase_pos + 1);
    Id sp_new = sp;
    if (use_form && i > 0) {
      sp_new = tp.add(tp.slice_rows(form_out, i - 1, i), sp);
      positions.push_back(ph.phrase_pos);
      rows.push_back(sp_new);
      ++tr.phrase_rows_updated;
    }
    if (use_texture) {
      for (size_t j = 0; j < ph.chord_pos.size(); ++j) {
        Id sc = tp.slice_rows(S, ph.chord_pos[j], ph.chord_pos[j] + 1);
        Id base = sp_new;
        if (j > 0)
          base = tp.add(sp_new, tp.slice_rows(tex[i], static_cast<int>(j) - 1,
                                              static_cast<int>(j)));
        positions.push_back(ph.chord_pos[j]);
        rows.push_back(tp.add(base, sc));
        ++tr.chord_rows_updated;
      }
    }
  }
  if (positions.empty()) return S;
  return tp.overwrite_rows(S, tp.concat_rows(rows), positions);
}

// --- Full forward --------------------------------------------------------------

// Embed -> bottom song transformer -> HSE -> top song transformer. Returns the
// final per-token states (one row per token, width cfg.dim).
template <typename T>
typename Tape<T>::Id hat_states(Tape<T>& tp, HATParameters<T>& P, const HATConfig& cfg,
                                const Vocabulary& vocab, const TokenSeq& toks,
                                HseTrace* trace = nullptr) {
  typename Tape<T>::Id e = embed_tokens(tp, P, vocab, toks);
  typename Tape<T>::Id s = bottom_song_forward(tp, P, cfg, e);
  typename Tape<T>::Id sp = hse_forward(tp, P, cfg, s, hse_groups(toks), trace);
  return top_song_forward(tp, P, cfg, sp);
}

// --- Prediction heads ----------------------------------------------------------

template <typename T>
struct HeadNodes {
  typename Tape<T>::Id type_logits = -1;
  std::array<typename Tape<T>::Id, kNumCategories - 1> cat_logits{};  // Bar..Duration
};

// Two-stage heads: stage one reads the state alone and scores the next
// token's type; stage two scores the remaining eight categories from the
// state concatenated with an embedding of that type (ground truth during
// training, the sampled type during generation).
template <typename T>
HeadNodes<T> predict_heads(Tape<T>& tp, HATParameters<T>& P, typename Tape<T>::Id states,
                           const std::vector<int>& types) {
  using Id = typename Tape<T>::Id;
  if (static_cast<int>(types.size()) != tp.value(states).rows)
    throw ValidationError("predict_heads: need exactly one type per state row");
  for (int t : types)
    if (t < 0 || t >= kNumTokenTypes) throw ValidationError("predict_heads: type out of range");
  HeadNodes<T> h;
  h.type_logits = mlp_forward(tp, states, P.head_tp);
  Id x = tp.concat_cols({states, tp.gather_rows(tp.param(P.type_emb), types)});
  for (int k = 0; k < kNumCategories - 1; ++k) h.cat_logits[k] = mlp_forward(tp, x, P.head[k]);
  return h;
}

// Plain row-wise softmax for turning head logits into distributions outside
// the tape (evaluation and sampling never need gradients).
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  Tensor<T> out(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    const T* lr = logits.row(i);
    T mx = lr[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, lr[j]);
    T denom = 0;
    for (int j = 0; j < logits.cols; ++j) denom += std::exp(lr[j] - mx);
    T* orow = out.row(i);
    for (int j = 0; j < logits.cols; ++j) orow[j] = std::exp(lr[j] - mx) / denom;
  }
  return out;
}

// --- Loss ----------------------------------------------------------------------

// Teacher-forced next-token loss over a whole sequence: position i predicts
// token i+1 in all nine categories, each category's cross-entropy scaled by
// its configured weight, summed over positions. IGNORE is index 0 of every
// category that has it and is a real target (the model must learn which
// fields a token type carries). Stage two sees the ground-truth next type.
template <typename T>
typename Tape<T>::Id hat_loss(Tape<T>& tp, HATParameters<T>& P, const HATConfig& cfg,
                              const Vocabulary& vocab, const TokenSeq& toks,
                              HseTrace* trace = nullptr) {
  using Id = typename Tape<T>::Id;
  if (toks.size() < 2) throw ValidationError("hat_loss: need at least two tokens");
  Id s2 = hat_states(tp, P, cfg, vocab, toks, trace);
  const int n = static_cast<int>(toks.size()) - 1;
  Id ctx = tp.slice_rows(s2, 0, n);

  std::vector<std::array<int, kNumCategories>> target(n);
  std::vector<int> types(n);
  for (int i = 0; i < n; ++i) {
    target[i] = vocab.encode(toks[i + 1]);
    types[i] = target[i][0];
  }
  HeadNodes<T> h = predict_heads(tp, P, ctx, types);

  std::vector<Id> parts;
  parts.reserve(kNumCategories);
  for (int c = 0; c < kNumCategories; ++c) {
    std::vector<int> t(n);
    for (int i = 0; i < n; ++i) t[i] = target[i][c];
    std::vector<T> w(n, T(cfg.loss_weights[c]));
    Id logits = c == 0 ? h.type_logits : h.cat_logits[c - 1];
    parts.push_back(tp.cross_entropy_sum(logits, t, w));
  }
  return tp.add_scalars(parts);
}

}  // namespace hat
