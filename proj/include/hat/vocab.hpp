// Nine-event token type and per-category vocabularies.
//
// A token is one sequence element carrying all nine event values. Field
// values live in their natural domains (bar index, MIDI pitch, chord id...)
// with kIgnore marking non-applicable fields; the Vocabulary maps each
// category to dense indices where 0 is reserved for IGNORE. The type
// category is the exception: a token always has a type, so its five values
// occupy indices 0-4 with no IGNORE slot.
#pragma once

#include <array>
#include <cmath>
#include <string>

#include "hat/common.hpp"
#include "hat/song.hpp"

namespace hat {

enum class Category : int {
  Type = 0, Bar, Beat, Tempo, Phrase, Chord, Track, Pitch, Duration,
};

constexpr int kNumCategories = 9;

inline const char* category_name(Category c) {
  static const char* names[kNumCategories] = {
      "type", "bar", "beat", "tempo", "phrase", "chord", "track", "pitch", "duration"};
  return names[static_cast<int>(c)];
}

enum class TokenType : int { BOS = 0, EOS = 1, Phrase = 2, Chord = 3, Note = 4 };

constexpr int kNumTokenTypes = 5;
constexpr int kIgnore = -1;

// Phrase-label category also carries a continuation mark used when long
// phrases are split for training; it is not a Song-level label.
constexpr int kPlusPhraseId = kNumPhraseLabels;  // 52

struct Token {
  TokenType type = TokenType::BOS;
  int bar = kIgnore;       // [0, bar_cap)
  int beat = kIgnore;      // [0, 16)
  int tempo = kIgnore;     // tempo bin id
  int phrase = kIgnore;    // phrase label id, kPlusPhraseId for continuation
  int chord = kIgnore;     // chord symbol id
  int track = kIgnore;     // TrackId as int
  int pitch = kIgnore;     // [0, 128)
  int duration = kIgnore;  // steps for Note/Chord, bars for Phrase; [1, 64]

  bool operator==(const Token&) const = default;

  // Step position; only meaningful for positioned (Phrase/Chord/Note) tokens.
  int onset() const { return bar * kStepsPerBar + beat; }

  static Token bos() { return Token{}; }
  static Token eos() {
    Token t;
    t.type = TokenType::EOS;
    return t;
  }
};

using TokenSeq = std::vector<Token>;

struct VocabConfig {
  int bar_cap = 256;
  double tempo_min = 30.0;
  double tempo_max = 210.0;
  int tempo_bins = 32;

  bool operator==(const VocabConfig&) const = default;
};

class Vocabulary {
 public:
  explicit Vocabulary(VocabConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.bar_cap < 1 || cfg_.tempo_bins < 1 || !(cfg_.tempo_max > cfg_.tempo_min))
      throw ValidationError("bad vocabulary config");
    sizes_[0] = kNumTokenTypes;            // no IGNORE slot for type
    sizes_[1] = 1 + cfg_.bar_cap;
    sizes_[2] = 1 + kStepsPerBar;
    sizes_[3] = 1 + cfg_.tempo_bins;
    sizes_[4] = 1 + kNumPhraseLabels + 1;  // labels + continuation mark
    sizes_[5] = 1 + kNumChordSymbols;
    sizes_[6] = 1 + 3;                     // PM/SM/HRS
    sizes_[7] = 1 + 128;
    sizes_[8] = 1 + kMaxNoteDuration;      // durations 1..64 map to index 1..64
  }

  const VocabConfig& config() const { return cfg_; }

  int size(Category c) const { return sizes_[static_cast<int>(c)]; }
  const std::array<int, kNumCategories>& sizes() const { return sizes_; }

  int tempo_bin(double bpm) const {
    double width = (cfg_.tempo_max - cfg_.tempo_min) / cfg_.tempo_bins;
    int b = static_cast<int>(std::floor((bpm - cfg_.tempo_min) / width));
    return std::clamp(b, 0, cfg_.tempo_bins - 1);
  }

  // Bin center, the tempo written back when decoding.
  double tempo_value(int bin) const {
    if (bin < 0 || bin >= cfg_.tempo_bins) throw ValidationError("tempo bin out of range");
    double width = (cfg_.tempo_max - cfg_.tempo_min) / cfg_.tempo_bins;
    return cfg_.tempo_min + (bin + 0.5) * width;
  }

  // Token fields -> dense indices. The IGNORE sentinel maps to index 0 in
  // every category except type.
  std::array<int, kNumCategories> encode(const Token& t) const {
    std::array<int, kNumCategories> idx{};
    idx[0] = static_cast<int>(t.type);
    idx[1] = t.bar == kIgnore ? 0 : t.bar + 1;
    idx[2] = t.beat == kIgnore ? 0 : t.beat + 1;
    idx[3] = t.tempo == kIgnore ? 0 : t.tempo + 1;
    idx[4] = t.phrase == kIgnore ? 0 : t.phrase + 1;
    idx[5] = t.chord == kIgnore ? 0 : t.chord + 1;
    idx[6] = t.track == kIgnore ? 0 : t.track + 1;
    idx[7] = t.pitch == kIgnore ? 0 : t.pitch + 1;
    idx[8] = t.duration == kIgnore ? 0 : t.duration;  // duration >= 1
    for (int c = 0; c < kNumCategories; ++c)
      if (idx[c] < 0 || idx[c] >= sizes_[c])
        throw ValidationError(std::string("token field out of vocabulary range: ") +
                              category_name(static_cast<Category>(c)));
    return idx;
  }

  Token decode(const std::array<int, kNumCategories>& idx) const {
    for (int c = 0; c < kNumCategories; ++c)
      if (idx[c] < 0 || idx[c] >= sizes_[c])
        throw ParseError(std::string("token index out of vocabulary range: ") +
                         category_name(static_cast<Category>(c)));
    Token t;
    t.type = static_cast<TokenType>(idx[0]);
    t.bar = idx[1] == 0 ? kIgnore : idx[1] - 1;
    t.beat = idx[2] == 0 ? kIgnore : idx[2] - 1;
    t.tempo = idx[3] == 0 ? kIgnore : idx[3] - 1;
    t.phrase = idx[4] == 0 ? kIgnore : idx[4] - 1;
    t.chord = idx[5] == 0 ? kIgnore : idx[5] - 1;
    t.track = idx[6] == 0 ? kIgnore : idx[6] - 1;
    t.pitch = idx[7] == 0 ? kIgnore : idx[7] - 1;
    t.duration = idx[8] == 0 ? kIgnore : idx[8];
    return t;
  }

  // Fingerprint of the whole symbol space; embedded in token files and
  // checkpoints so mismatched artifacts are rejected early.
  uint64_t hash() const {
    Fnv1a h;
    h.update(static_cast<uint64_t>(cfg_.bar_cap));
    h.update(static_cast<uint64_t>(cfg_.tempo_bins));
    h.update(&cfg_.tempo_min, sizeof(double));
    h.update(&cfg_.tempo_max, sizeof(double));
    for (int c = 0; c < kNumCategories; ++c) {
      h.update(category_name(static_cast<Category>(c)));
      h.update(static_cast<uint64_t>(sizes_[c]));
    }
    for (int id = 0; id < kNumChordSymbols; ++id) h.update(ChordSymbol::from_id(id).str());
    for (int id = 0; id < kNumPhraseLabels; ++id)
      h.update(std::string(1, phrase_label_from_id(id)));
    h.update("+");
    return h.digest();
  }

 private:
  VocabConfig cfg_;
  std::array<int, kNumCategories> sizes_{};
};

inline std::string vocab_summary(const Vocabulary& v) {
  std::string out = "vocab_hash=" + to_hex(v.hash()) + "\n";
  for (int c = 0; c < kNumCategories; ++c) {
    out += category_name(static_cast<Category>(c));
    out += "=" + std::to_string(v.size(static_cast<Category>(c))) + "\n";
  }
  return out;
}

}  // namespace hat
