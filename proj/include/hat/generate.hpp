#pragma once
// Recurrent generation. The decoder keeps an explicit structure state (the
// current phrase row, the last texture/form outputs, chord buffers) and
// produces, for every emitted token, the exact row the batch forward would
// compute at that position: causal attention means a finished row never
// changes when the sequence grows, texture/form outputs for a prefix equal
// the corresponding rows of the full pass, and the row-update adds are done
// in the same order as the batch code. That bit-level equivalence is what
// the incremental-vs-batch tests pin down.

#include <string>
#include <vector>

#include "hat/model.hpp"
#include "hat/sampling.hpp"

namespace hat {

// Recurrent decoding state. All vectors are 1 x dim in the model width.
template <typename T>
struct StructureState {
  int dim = 0;
  int phrase_count = 0;         // phrases seen so far
  int chord_count = 0;          // chords inside the current phrase
  Tensor<T> last_texture;       // texture output at the previous chord; zero at phrase start
  Tensor<T> last_form;          // form output used by the current phrase; zero before phrase 2
  Tensor<T> phrase_row;         // bottom row of the current phrase token
  Tensor<T> phrase_row_updated; // that row after its form update
  std::vector<Tensor<T>> chord_buffer;    // bottom rows feeding the texture pass
  std::vector<Tensor<T>> phrase_history;  // form inputs of completed phrases:
                                          // texture outputs (full) or raw phrase rows (form-only)

  explicit StructureState(int d = 0)
      : dim(d), last_texture(1, d), last_form(1, d), phrase_row(1, d),
        phrase_row_updated(1, d) {}
};

namespace detail {

// Values-only pass of a parameter stack over a plain matrix.
template <typename T>
Tensor<T> run_stack(StackParams<T>& stack, const Tensor<T>& x) {
  Tape<T> tp;
  return tp.value(transformer_stack(tp, tp.input(x), stack));
}

// Texture over the buffered chord rows; phrase_row, when given, is added to
// every row first (same element order as the batch add_row/add_const pair).
// Returns the last output row.
template <typename T>
Tensor<T> texture_last_row(HATParameters<T>& P, const HATConfig& cfg,
                           const std::vector<Tensor<T>>& buffer, const Tensor<T>* phrase_row) {
  const int n = static_cast<int>(buffer.size());
  Tensor<T> x(n, cfg.dim);
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < cfg.dim; ++k) {
      T v = buffer[r].data[k];
      if (phrase_row) v = v + phrase_row->data[k];
      x.at(r, k) = v;
    }
  Tensor<T> pe = positional_encoding<T>(n, cfg.dim);
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += pe.data[i];
  Tensor<T> out = run_stack(P.texture, x);
  Tensor<T> last(1, cfg.dim);
  std::copy(out.row(n - 1), out.row(n - 1) + cfg.dim, last.data.begin());
  return last;
}

// Form over the completed phrases' rows; returns the last output row.
template <typename T>
Tensor<T> form_last_row(HATParameters<T>& P, const HATConfig& cfg,
                        const std::vector<Tensor<T>>& rows) {
  const int n = static_cast<int>(rows.size());
  Tensor<T> x(n, cfg.dim);
  for (int r = 0; r < n; ++r)
    std::copy(rows[r].data.begin(), rows[r].data.end(), x.row(r));
  Tensor<T> pe = positional_encoding<T>(n, cfg.dim);
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += pe.data[i];
  Tensor<T> out = run_stack(P.form, x);
  Tensor<T> last(1, cfg.dim);
  std::copy(out.row(n - 1), out.row(n - 1) + cfg.dim, last.data.begin());
  return last;
}

}  // namespace detail

// Feeds one freshly appended token (with its bottom-transformer row) through
// the structure bookkeeping and returns the enhanced row for that position.
// Throws when the token would overflow a structure window, exactly like the
// batch pass would on the same sequence.
template <typename T>
Tensor<T> advance_structure(StructureState<T>& st, HATParameters<T>& P, const HATConfig& cfg,
                            const Token& tok, const Tensor<T>& bottom_row) {
  if (bottom_row.rows != 1 || bottom_row.cols != cfg.dim)
    throw ValidationError("advance_structure: bottom row has the wrong shape");
  if (st.dim != cfg.dim) throw ValidationError("advance_structure: state width mismatch");

  const bool use_texture = cfg.variant == Variant::Full || cfg.variant == Variant::WithTexture;
  const bool use_form = cfg.variant == Variant::Full || cfg.variant == Variant::WithForm;

  if (tok.type == TokenType::Phrase) {
    // Close out the previous phrase: its texture (or raw row) becomes a form
    // input. A chordless phrase leaves last_texture at zero, which is the
    // zero row the batch pass inserts.
    if (st.phrase_count > 0) {
      if (cfg.variant == Variant::Full)
        st.phrase_history.push_back(st.last_texture);
      else if (cfg.variant == Variant::WithForm)
        st.phrase_history.push_back(st.phrase_row);
    }
    ++st.phrase_count;
    if (use_form && st.phrase_count > cfg.max_phrases)
      throw ValidationError("form transformer: " + std::to_string(st.phrase_count) +
                            " phrases exceed window " + std::to_string(cfg.max_phrases));
    st.phrase_row = bottom_row;
    if (use_form && st.phrase_count > 1) {
      st.last_form = detail::form_last_row(P, cfg, st.phrase_history);
      Tensor<T> updated(1, cfg.dim);
      for (int k = 0; k < cfg.dim; ++k)
        updated.data[k] = st.last_form.data[k] + bottom_row.data[k];
      st.phrase_row_updated = updated;
    } else {
      st.phrase_row_updated = bottom_row;  // first phrase, or no form path
    }
    // New phrase: chord indexing restarts. The texture-only ablation keeps
    // its chord buffer (one pass spans the whole song).
    st.chord_count = 0;
    st.last_texture = Tensor<T>(1, cfg.dim);
    if (cfg.variant == Variant::Full) st.chord_buffer.clear();
    return st.phrase_row_updated;
  }

  if (tok.type == TokenType::Chord && use_texture && st.phrase_count > 0) {
    ++st.chord_count;
    Tensor<T> out(1, cfg.dim);
    if (st.chord_count == 1) {
      for (int k = 0; k < cfg.dim; ++k)
        out.data[k] = st.phrase_row_updated.data[k] + bottom_row.data[k];
    } else {
      for (int k = 0; k < cfg.dim; ++k)
        out.data[k] = (st.phrase_row_updated.data[k] + st.last_texture.data[k]) +
                      bottom_row.data[k];
    }
    st.chord_buffer.push_back(bottom_row);
    if (static_cast<int>(st.chord_buffer.size()) > cfg.max_phrase_chords)
      throw ValidationError("texture transformer: " +
                            std::to_string(st.chord_buffer.size()) + " chords exceed window " +
                            std::to_string(cfg.max_phrase_chords));
    const Tensor<T>* anchor = cfg.variant == Variant::Full ? &st.phrase_row : nullptr;
    st.last_texture = detail::texture_last_row(P, cfg, st.chord_buffer, anchor);
    return out;
  }

  // BOS, EOS, notes, chords ahead of the first phrase, and everything under
  // the base/form-only variants pass through untouched.
  return bottom_row;
}

template <typename T>
struct ReplayOutcome {
  StructureState<T> state;
  std::vector<Tensor<T>> rows;  // enhanced row per prompt position
};

// Rebuilds the decoding state by running the prompt through the same
// per-token bookkeeping the generator uses.
template <typename T>
ReplayOutcome<T> replay_prompt(HATParameters<T>& P, const HATConfig& cfg,
                               const Vocabulary& vocab, const TokenSeq& prompt) {
  Tape<T> tp;
  Tensor<T> bottom = tp.value(bottom_song_forward(tp, P, cfg, embed_tokens(tp, P, vocab, prompt)));
  ReplayOutcome<T> out{StructureState<T>(cfg.dim), {}};
  out.rows.reserve(prompt.size());
  for (size_t i = 0; i < prompt.size(); ++i) {
    Tensor<T> row(1, cfg.dim);
    std::copy(bottom.row(static_cast<int>(i)), bottom.row(static_cast<int>(i)) + cfg.dim,
              row.data.begin());
    out.rows.push_back(advance_structure(out.state, P, cfg, prompt[i], row));
  }
  return out;
}

template <typename T>
using StepDists = std::array<std::vector<T>, kNumCategories>;

struct GenerateResult {
  TokenSeq tokens;
  bool truncated = false;       // stopped before the model emitted EOS
  std::string stop_reason;      // "eos", "length", or "structure"
};

// Autoregressive decoding from a prompt (at minimum [BOS]). Per step: top
// transformer over the enhanced rows, stage-one type distribution, one
// nucleus draw for the type, stage-two distributions conditioned on that
// type, one draw per remaining category. Stops at EOS, at the song window,
// or right before a token that would overflow a texture/form window (so the
// emitted sequence always re-scores cleanly in batch mode).
//
// step_dists, when given, records the nine distributions the sampler saw for
// every emitted token - the batch forward must reproduce them exactly.
template <typename T>
GenerateResult generate(HATParameters<T>& P, const HATConfig& cfg, const Vocabulary& vocab,
                        const TokenSeq& prompt, Rng& rng,
                        std::vector<StepDists<T>>* step_dists = nullptr) {
  cfg.validate();
  if (prompt.empty() || prompt.front().type != TokenType::BOS)
    throw ValidationError("generate: prompt must start with BOS");
  for (const Token& t : prompt)
    if (t.type == TokenType::EOS)
      throw ValidationError("generate: prompt already contains EOS");
  if (static_cast<int>(prompt.size()) > cfg.max_song_len)
    throw ValidationError("generate: prompt exceeds the song window");

  GenerateResult res;
  res.tokens = prompt;
  ReplayOutcome<T> rp = replay_prompt(P, cfg, vocab, prompt);
  StructureState<T>& st = rp.state;
  std::vector<Tensor<T>>& rows = rp.rows;

  auto row_dist = [](const Tensor<T>& logits, int r) {
    Tensor<T> probs = softmax_rows(logits);
    return std::vector<T>(probs.row(r), probs.row(r) + probs.cols);
  };

  while (static_cast<int>(res.tokens.size()) < cfg.max_song_len) {
    const int L = static_cast<int>(res.tokens.size());

    // Top pass over the enhanced rows; the newest state drives the heads.
    Tensor<T> sprime(L, cfg.dim);
    for (int i = 0; i < L; ++i)
      std::copy(rows[i].data.begin(), rows[i].data.end(), sprime.row(i));
    Tape<T> tp;
    auto top = top_song_forward(tp, P, cfg, tp.input(sprime));
    auto state = tp.slice_rows(top, L - 1, L);

    auto type_logits = mlp_forward(tp, state, P.head_tp);
    StepDists<T> dists;
    dists[0] = row_dist(tp.value(type_logits), 0);
    int type_idx = nucleus_sample(dists[0], cfg.sampling[0], rng);

    auto x = tp.concat_cols({state, tp.gather_rows(tp.param(P.type_emb), {type_idx})});
    for (int c = 1; c < kNumCategories; ++c)
      dists[c] = row_dist(tp.value(mlp_forward(tp, x, P.head[c - 1])), 0);

    if (type_idx == static_cast<int>(TokenType::EOS)) {
      if (step_dists) step_dists->push_back(dists);
      res.tokens.push_back(Token::eos());
      res.stop_reason = "eos";
      return res;
    }

    std::array<int, kNumCategories> idx{};
    idx[0] = type_idx;
    for (int c = 1; c < kNumCategories; ++c)
      idx[c] = nucleus_sample(dists[c], cfg.sampling[c], rng);
    Token tok = vocab.decode(idx);

    // Refuse tokens the batch forward could not score.
    const bool use_texture = cfg.variant == Variant::Full || cfg.variant == Variant::WithTexture;
    const bool use_form = cfg.variant == Variant::Full || cfg.variant == Variant::WithForm;
    if (tok.type == TokenType::Phrase && use_form && st.phrase_count + 1 > cfg.max_phrases) {
      res.truncated = true;
      res.stop_reason = "structure";
      return res;
    }
    if (tok.type == TokenType::Chord && use_texture && st.phrase_count > 0 &&
        static_cast<int>(st.chord_buffer.size()) + 1 > cfg.max_phrase_chords) {
      res.truncated = true;
      res.stop_reason = "structure";
      return res;
    }

    if (step_dists) step_dists->push_back(dists);
    res.tokens.push_back(tok);

    // Bottom pass over the grown sequence; only the new row is new.
    Tape<T> tb;
    Tensor<T> bottom =
        tb.value(bottom_song_forward(tb, P, cfg, embed_tokens(tb, P, vocab, res.tokens)));
    Tensor<T> row(1, cfg.dim);
    std::copy(bottom.row(L), bottom.row(L) + cfg.dim, row.data.begin());
    rows.push_back(advance_structure(st, P, cfg, res.tokens.back(), row));
  }

  res.truncated = true;
  res.stop_reason = "length";
  return res;
}

}  // namespace hat
