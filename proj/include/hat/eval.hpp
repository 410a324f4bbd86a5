#pragma once
// Next-token understanding task: dataset splitting, argmax accuracy and
// probability-vs-one-hot MSE per token type, and MSE-over-prompt-progress
// trend curves. Evaluation is deterministic: no sampling anywhere.

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "hat/model.hpp"

namespace hat {

// --- Dataset split ---------------------------------------------------------------

struct DatasetSplit {
  std::vector<int> train, valid, test;
};

// Seeded shuffle, then proportional assignment at 773:41:43 with
// largest-remainder rounding (ties favour train, then valid).
inline DatasetSplit split_dataset(int n_songs, uint64_t seed) {
  if (n_songs < 3) throw ValidationError("split_dataset: need at least 3 songs");
  constexpr int64_t kWeights[3] = {773, 41, 43};
  constexpr int64_t kTotal = kWeights[0] + kWeights[1] + kWeights[2];

  int64_t sizes[3], rem[3];
  int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    int64_t scaled = static_cast<int64_t>(n_songs) * kWeights[i];
    sizes[i] = scaled / kTotal;
    rem[i] = scaled % kTotal;
    assigned += sizes[i];
  }
  int leftover = static_cast<int>(n_songs - assigned);
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int k = 0; k < leftover; ++k) sizes[order[k]] += 1;

  std::vector<int> idx(n_songs);
  for (int i = 0; i < n_songs; ++i) idx[i] = i;
  Rng rng(seed);
  for (int i = n_songs - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(static_cast<uint64_t>(i) + 1)]);

  DatasetSplit out;
  out.train.assign(idx.begin(), idx.begin() + sizes[0]);
  out.valid.assign(idx.begin() + sizes[0], idx.begin() + sizes[0] + sizes[1]);
  out.test.assign(idx.begin() + sizes[0] + sizes[1], idx.end());
  return out;
}

// --- Per-position scoring ---------------------------------------------------------

struct EvalRecord {
  int sequence = 0;  // which evaluated sequence
  int position = 0;  // index of the predicted (target) token
  TokenType type = TokenType::Note;
  std::array<bool, kNumCategories> correct{};     // argmax == target, per category
  std::array<bool, kNumCategories> applicable{};  // field present on the target
  std::array<double, kNumCategories> sq_err{};    // mean squared error per category
  double progress = 0.0;  // share of this type's tokens already seen in the song

  // Composite correctness: every field the token actually carries is hit.
  // Type itself is scored separately (correct[0]).
  bool accurate() const {
    for (int c = 1; c < kNumCategories; ++c)
      if (applicable[c] && !correct[c]) return false;
    return true;
  }

  double mse() const {
    double s = 0.0;
    for (double e : sq_err) s += e;
    return s / kNumCategories;
  }
};

using StepDistsD = std::array<std::vector<double>, kNumCategories>;

// Scores one position given the nine predicted distributions and the
// encoded target. Pure, so oracle distributions can be injected directly.
inline EvalRecord score_position(const StepDistsD& dists,
                                 const std::array<int, kNumCategories>& target, TokenType type,
                                 int sequence, int position, double progress) {
  EvalRecord r;
  r.sequence = sequence;
  r.position = position;
  r.type = type;
  r.progress = progress;
  for (int c = 0; c < kNumCategories; ++c) {
    const std::vector<double>& p = dists[c];
    if (p.empty()) throw ValidationError("score_position: empty distribution");
    if (target[c] < 0 || target[c] >= static_cast<int>(p.size()))
      throw ValidationError("score_position: target out of range");
    int argmax = 0;
    for (int k = 1; k < static_cast<int>(p.size()); ++k)
      if (p[k] > p[argmax]) argmax = k;
    r.correct[c] = argmax == target[c];
    r.applicable[c] = c == 0 || target[c] != 0;
    double sq = 0.0;
    for (int k = 0; k < static_cast<int>(p.size()); ++k) {
      double want = k == target[c] ? 1.0 : 0.0;
      sq += (p[k] - want) * (p[k] - want);
    }
    r.sq_err[c] = sq / static_cast<double>(p.size());
  }
  return r;
}

// --- Whole-model evaluation --------------------------------------------------------

// Runs the training-mode forward (ground-truth types into stage two) over
// each held-out sequence and scores every next-token position.
template <typename T>
std::vector<EvalRecord> next_token_eval(HATParameters<T>& P, const HATConfig& cfg,
                                        const Vocabulary& vocab,
                                        const std::vector<TokenSeq>& seqs) {
  for (int c = 0; c < kNumCategories; ++c)
    if (P.emb[c].value.rows != vocab.size(static_cast<Category>(c)))
      throw ValidationError("next_token_eval: model and data vocabularies differ");

  std::vector<EvalRecord> records;
  for (size_t si = 0; si < seqs.size(); ++si) {
    const TokenSeq& toks = seqs[si];
    if (toks.size() < 2) throw ValidationError("next_token_eval: sequence shorter than 2 tokens");
    const int len = static_cast<int>(toks.size());

    Tape<T> tp;
    auto st = hat_states(tp, P, cfg, vocab, toks);
    auto ctx = tp.slice_rows(st, 0, len - 1);
    std::vector<int> types(len - 1);
    for (int i = 0; i + 1 < len; ++i) types[i] = static_cast<int>(toks[i + 1].type);
    auto heads = predict_heads(tp, P, ctx, types);
    std::array<Tensor<T>, kNumCategories> dist;
    dist[0] = softmax_rows(tp.value(heads.type_logits));
    for (int c = 1; c < kNumCategories; ++c)
      dist[c] = softmax_rows(tp.value(heads.cat_logits[c - 1]));

    std::array<int, kNumTokenTypes> totals{}, seen{};
    for (int i = 1; i < len; ++i) totals[static_cast<int>(toks[i].type)] += 1;

    for (int i = 0; i + 1 < len; ++i) {
      const Token& target = toks[i + 1];
      int t = static_cast<int>(target.type);
      StepDistsD row;
      for (int c = 0; c < kNumCategories; ++c)
        row[c].assign(dist[c].row(i), dist[c].row(i) + dist[c].cols);
      double progress = static_cast<double>(seen[t]) / static_cast<double>(totals[t]);
      records.push_back(score_position(row, vocab.encode(target), target.type,
                                       static_cast<int>(si), i + 1, progress));
      seen[t] += 1;
    }
  }
  return records;
}

// --- Aggregation -------------------------------------------------------------------

struct EvalRow {
  int count = 0;
  double accuracy = 0.0;
  double mse = 0.0;
};

// Stage-one scoring over every position: did the model name the right type?
inline EvalRow type_row(const std::vector<EvalRecord>& records) {
  EvalRow row;
  for (const EvalRecord& r : records) {
    row.count += 1;
    row.accuracy += r.correct[0] ? 1.0 : 0.0;
    row.mse += r.sq_err[0];
  }
  if (row.count) {
    row.accuracy /= row.count;
    row.mse /= row.count;
  }
  return row;
}

// Composite field scoring over targets of one type.
inline EvalRow composite_row(const std::vector<EvalRecord>& records, TokenType t) {
  EvalRow row;
  for (const EvalRecord& r : records) {
    if (r.type != t) continue;
    row.count += 1;
    row.accuracy += r.accurate() ? 1.0 : 0.0;
    row.mse += r.mse();
  }
  if (row.count) {
    row.accuracy /= row.count;
    row.mse /= row.count;
  }
  return row;
}

// --- Trend curves -------------------------------------------------------------------

struct TrendBin {
  int count = 0;
  std::optional<double> mean_mse;  // empty bins stay empty rather than zero
};

struct TrendCurve {
  TokenType type = TokenType::Note;
  std::vector<TrendBin> bins;
};

// Buckets records by prompt progress into equal-width bins, one curve per
// musical token type.
inline std::vector<TrendCurve> mse_trend(const std::vector<EvalRecord>& records, int bins = 10) {
  if (bins < 1) throw ValidationError("mse_trend: need at least one bin");
  std::vector<TrendCurve> curves;
  for (TokenType t : {TokenType::Note, TokenType::Chord, TokenType::Phrase}) {
    TrendCurve c;
    c.type = t;
    c.bins.resize(bins);
    std::vector<double> sums(bins, 0.0);
    for (const EvalRecord& r : records) {
      if (r.type != t) continue;
      if (r.progress < 0.0 || r.progress > 1.0)
        throw ValidationError("mse_trend: progress out of range");
      int b = std::min(bins - 1, static_cast<int>(r.progress * bins));
      c.bins[b].count += 1;
      sums[b] += r.mse();
    }
    for (int b = 0; b < bins; ++b)
      if (c.bins[b].count) c.bins[b].mean_mse = sums[b] / c.bins[b].count;
    curves.push_back(std::move(c));
  }
  return curves;
}

}  // namespace hat
