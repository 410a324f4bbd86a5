#pragma once
// Temperature + nucleus sampling over per-category distributions. Works on
// probabilities (what the heads emit after softmax): dividing log-probs by
// the temperature is the same reshaping as dividing logits, and the nucleus
// keeps the smallest high-probability prefix whose mass reaches top_p.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "hat/vocab.hpp"

namespace hat {

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;  // nucleus mass; 1.0 keeps the whole distribution

  bool operator==(const SamplingParams&) const = default;
};

// Draws one index. Consumes exactly one uniform from the rng regardless of
// the distribution, so downstream draws stay aligned across runs.
template <typename T>
int nucleus_sample(const std::vector<T>& probs, const SamplingParams& sp, Rng& rng) {
  const int n = static_cast<int>(probs.size());
  if (n == 0) throw ValidationError("nucleus_sample: empty distribution");
  if (!(sp.temperature > 0)) throw ValidationError("nucleus_sample: temperature must be positive");
  if (!(sp.top_p > 0) || sp.top_p > 1.0)
    throw ValidationError("nucleus_sample: top_p must lie in (0, 1]");

  double mx = -std::numeric_limits<double>::infinity();
  for (T p : probs) {
    if (!(p >= 0)) throw ValidationError("nucleus_sample: negative or NaN probability");
    if (p > 0) mx = std::max(mx, std::log(static_cast<double>(p)));
  }
  if (!std::isfinite(mx)) throw ValidationError("nucleus_sample: no positive mass");

  // w_i proportional to p_i^(1/temperature), max-shifted in log space so a
  // tiny temperature sharpens toward the argmax without overflowing.
  std::vector<double> w(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (probs[i] > 0)
      w[i] = std::exp((std::log(static_cast<double>(probs[i])) - mx) / sp.temperature);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w[a] > w[b]; });

  double total = std::accumulate(w.begin(), w.end(), 0.0);
  int kept = 0;
  double kept_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    kept_mass += w[order[i]];
    ++kept;
    if (kept_mass >= sp.top_p * total) break;
  }

  double u = rng.uniform() * kept_mass;
  double acc = 0.0;
  for (int i = 0; i < kept; ++i) {
    acc += w[order[i]];
    if (u < acc) return order[i];
  }
  return order[kept - 1];  // u == kept_mass after rounding
}

// The per-token sampling step: one nucleus draw per category (in category
// order), decoded into a Token through the vocabulary.
template <typename T>
Token sample_token(const std::array<std::vector<T>, kNumCategories>& dists,
                   const std::array<SamplingParams, kNumCategories>& sampling,
                   const Vocabulary& vocab, Rng& rng) {
  std::array<int, kNumCategories> idx{};
  for (int c = 0; c < kNumCategories; ++c) idx[c] = nucleus_sample(dists[c], sampling[c], rng);
  return vocab.decode(idx);
}

}  // namespace hat
