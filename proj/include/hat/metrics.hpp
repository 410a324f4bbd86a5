#pragma once
// Objective structure metrics: groove stability across adjacent chords
// (texture) and chord-progression irregularity / variation rationality /
// realism against an n-gram model of a reference corpus (form).

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hat/song.hpp"

namespace hat {

// Binary onset pattern of one chord span, one bit per 16th-note frame.
struct GrooveVector {
  std::vector<uint8_t> bits;

  bool any() const {
    for (uint8_t b : bits)
      if (b) return true;
    return false;
  }
  bool operator==(const GrooveVector&) const = default;
};

// Which tracks contribute onsets. Grooves describe accompaniment texture,
// but by default every track counts; accompaniment() restricts to SM+HRS.
struct GrooveFilter {
  std::array<bool, 3> tracks = {true, true, true};  // indexed by TrackId

  static GrooveFilter accompaniment() { return {{false, true, true}}; }
};

// Frame j of chord i is 1 iff some admitted note onsets there. Sustains
// crossing a frame do not count; only onsets do.
inline std::vector<std::pair<ChordSpan, GrooveVector>> extract_grooves(
    const Song& song, const GrooveFilter& filter = {}) {
  std::vector<std::pair<ChordSpan, GrooveVector>> out;
  out.reserve(song.chords.size());
  for (const ChordSpan& c : song.chords) {
    GrooveVector g;
    g.bits.assign(static_cast<size_t>(c.duration), 0);
    for (const Note& n : song.notes) {
      if (!filter.tracks[static_cast<int>(n.track)]) continue;
      if (n.onset >= c.onset && n.onset < c.end()) g.bits[n.onset - c.onset] = 1;
    }
    out.push_back({c, g});
  }
  return out;
}

// 1 - Sum(XOR)/Sum(OR) over two same-length grooves.
inline double ags_pair(const GrooveVector& a, const GrooveVector& b) {
  if (a.bits.size() != b.bits.size()) throw ValidationError("ags_pair: groove lengths differ");
  int xor_sum = 0, or_sum = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) {
    int x = a.bits[i] ? 1 : 0, y = b.bits[i] ? 1 : 0;
    xor_sum += x ^ y;
    or_sum += x | y;
  }
  if (or_sum == 0) throw ValidationError("ags_pair: both grooves are empty");
  return 1.0 - static_cast<double>(xor_sum) / static_cast<double>(or_sum);
}

// Mean pair score over adjacent chords of equal duration, skipping pairs
// whose grooves are both silent. A song with no eligible pair has no AGS
// at all rather than a zero one.
inline std::optional<double> ags(const Song& song, const GrooveFilter& filter = {}) {
  auto grooves = extract_grooves(song, filter);
  double sum = 0.0;
  int pairs = 0;
  for (size_t i = 0; i + 1 < grooves.size(); ++i) {
    const GrooveVector& a = grooves[i].second;
    const GrooveVector& b = grooves[i + 1].second;
    if (a.bits.size() != b.bits.size()) continue;
    if (!a.any() && !b.any()) continue;
    sum += ags_pair(a, b);
    ++pairs;
  }
  if (pairs == 0) return std::nullopt;
  return sum / pairs;
}

// Chord identity for progressions: root pitch class + quality, dense ids.
// Consecutive duplicates are kept as they stand.
using ChordIds = std::vector<int>;

inline ChordIds chord_ids(const Song& song) {
  ChordIds out;
  out.reserve(song.chords.size());
  for (const ChordSpan& c : song.chords) out.push_back(c.symbol.id());
  return out;
}

// Share of distinct n-grams among all n-gram windows.
inline double cpi(const ChordIds& chords, int n) {
  if (n < 1) throw ValidationError("cpi: n must be >= 1");
  const int len = static_cast<int>(chords.size());
  if (len < n) throw ValidationError("cpi: need at least n chords");
  std::set<ChordIds> grams;
  for (int i = 0; i + n <= len; ++i)
    grams.insert(ChordIds(chords.begin() + i, chords.begin() + i + n));
  return static_cast<double>(grams.size()) / static_cast<double>(len - n + 1);
}

// Occurrence statistics of chord n-grams over a reference corpus. Context
// counts tally the leading (n-1) chords of every counted gram, so the
// conditionals below form a proper distribution per context.
struct NGramModel {
  int n = 2;
  std::map<ChordIds, int> counts;    // n-gram -> occurrences
  std::map<ChordIds, int> contexts;  // leading (n-1)-gram -> occurrences
  uint64_t corpus_hash = 0;          // provenance for reports

  // p(gram | its first n-1 chords); 0 when the corpus never saw the gram.
  double conditional(const ChordIds& gram) const {
    if (static_cast<int>(gram.size()) != n)
      throw ValidationError("conditional: gram order mismatch");
    auto it = counts.find(gram);
    if (it == counts.end()) return 0.0;
    auto ctx = contexts.find(ChordIds(gram.begin(), gram.end() - 1));
    // Every counted gram registered its context, so the lookup cannot miss.
    return static_cast<double>(it->second) / static_cast<double>(ctx->second);
  }
};

inline NGramModel build_ngram_model(const std::vector<ChordIds>& corpus, int n) {
  if (n < 1) throw ValidationError("build_ngram_model: n must be >= 1");
  if (corpus.empty()) throw ValidationError("build_ngram_model: empty corpus");
  NGramModel m;
  m.n = n;
  Fnv1a h;
  h.update("ngram:" + std::to_string(n));
  for (const ChordIds& seq : corpus) {
    for (int id : seq) h.update(std::to_string(id) + ",");
    h.update(";");
    for (int i = 0; i + n <= static_cast<int>(seq.size()); ++i) {
      ChordIds gram(seq.begin() + i, seq.begin() + i + n);
      m.counts[gram] += 1;
      gram.pop_back();
      m.contexts[gram] += 1;
    }
  }
  m.corpus_hash = h.digest();
  return m;
}

// Walk the piece left to right; each first appearance of an n-gram is a
// variation event scored by the model's conditional. CPVR averages them.
inline double cpvr(const ChordIds& chords, const NGramModel& model, int n) {
  if (model.n != n) throw ValidationError("cpvr: model order mismatch");
  const int len = static_cast<int>(chords.size());
  if (len < n) throw ValidationError("cpvr: need at least n chords");
  std::set<ChordIds> seen;
  double sum = 0.0;
  int events = 0;
  for (int i = 0; i + n <= len; ++i) {
    ChordIds gram(chords.begin() + i, chords.begin() + i + n);
    if (!seen.insert(gram).second) continue;
    sum += model.conditional(gram);
    ++events;
  }
  return sum / static_cast<double>(events);  // the first gram is always new
}

// lambda * CPI + (1 - lambda) * CPVR: stability against variation quality.
inline double cpr(const ChordIds& chords, const NGramModel& model, int n, double lambda = 0.5) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("cpr: lambda must lie in [0,1]");
  return lambda * cpi(chords, n) + (1.0 - lambda) * cpvr(chords, model, n);
}

}  // namespace hat
