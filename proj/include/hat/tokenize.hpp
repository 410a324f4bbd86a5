// Song <-> token-sequence conversion.
//
// A tokenized song is BOS + positioned events + EOS. Events are ordered by
// onset; at equal onset Phrase < Chord < Note so structure indicators
// precede the content they scope, and notes tie-break by track (PM<SM<HRS),
// pitch, duration. Phrase tokens carry their span length in bars and Chord
// tokens in steps, which is what makes detokenize exact.
//
// detokenize() is strict: any malformed token aborts with its index.
// detokenize_lenient() is for model output: it skips bad tokens, repairs
// coverage (no-chord spans under orphan notes, filler phrases) and reports
// every repair as a warning.
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hat/song.hpp"
#include "hat/vocab.hpp"

namespace hat {

inline TokenSeq tokenize(const Song& song, const Vocabulary& vocab) {
  validate_song(song);
  Song s = song;
  sort_song(s);

  const int tempo_bin = vocab.tempo_bin(s.tempo_bpm);
  const int bar_cap = vocab.config().bar_cap;
  if (s.end_step() > bar_cap * kStepsPerBar)
    throw ValidationError("song exceeds bar vocabulary cap (" + std::to_string(bar_cap) + ")");

  // Merge the three event lists. Class ranks: Phrase 0, Chord 1, Note 2.
  struct Ev {
    int onset;
    int rank;
    Token tok;
  };
  std::vector<Ev> events;
  events.reserve(s.phrases.size() + s.chords.size() + s.notes.size());

  auto positioned = [&](TokenType type, int onset) {
    Token t;
    t.type = type;
    t.bar = onset / kStepsPerBar;
    t.beat = onset % kStepsPerBar;
    t.tempo = tempo_bin;
    if (t.bar >= bar_cap)
      throw ValidationError("song exceeds bar vocabulary cap (" + std::to_string(bar_cap) + ")");
    return t;
  };
  auto phrase_at = [&](int onset) -> int {
    for (const auto& p : s.phrases)
      if (onset >= p.onset && onset < p.end()) return phrase_label_id(p.label);
    return kIgnore;
  };
  auto chord_at = [&](int onset) -> int {
    for (const auto& c : s.chords)
      if (onset >= c.onset && onset < c.end()) return c.symbol.id();
    return kIgnore;
  };

  for (const auto& p : s.phrases) {
    Token t = positioned(TokenType::Phrase, p.onset);
    t.phrase = phrase_label_id(p.label);
    t.duration = p.bars();
    events.push_back({p.onset, 0, t});
  }
  for (const auto& c : s.chords) {
    Token t = positioned(TokenType::Chord, c.onset);
    t.phrase = phrase_at(c.onset);
    t.chord = c.symbol.id();
    t.duration = c.duration;
    events.push_back({c.onset, 1, t});
  }
  for (const auto& n : s.notes) {
    Token t = positioned(TokenType::Note, n.onset);
    t.phrase = phrase_at(n.onset);
    t.chord = chord_at(n.onset);
    t.track = static_cast<int>(n.track);
    t.pitch = n.pitch;
    t.duration = n.duration;
    events.push_back({n.onset, 2, t});
  }

  std::stable_sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.rank < b.rank;
  });  // stable: note order within a rank is already canonical from sort_song

  TokenSeq seq;
  seq.reserve(events.size() + 2);
  seq.push_back(Token::bos());
  for (auto& e : events) seq.push_back(e.tok);
  seq.push_back(Token::eos());
  return seq;
}

namespace detail {

inline bool field_set(int v) { return v != kIgnore; }

// Applicability of the eight non-type fields per token type. Returns a
// human-readable violation or empty string.
inline std::string applicability_violation(const Token& t) {
  auto pos_fields = [&]() -> std::string {
    if (!field_set(t.bar) || !field_set(t.beat) || !field_set(t.tempo))
      return "positioned token missing bar/beat/tempo";
    if (!field_set(t.duration)) return "positioned token missing duration";
    return "";
  };
  switch (t.type) {
    case TokenType::BOS:
    case TokenType::EOS:
      if (field_set(t.bar) || field_set(t.beat) || field_set(t.tempo) || field_set(t.phrase) ||
          field_set(t.chord) || field_set(t.track) || field_set(t.pitch) || field_set(t.duration))
        return "boundary token with non-IGNORE fields";
      return "";
    case TokenType::Phrase: {
      std::string v = pos_fields();
      if (!v.empty()) return v;
      if (!field_set(t.phrase)) return "Phrase token without label";
      if (field_set(t.chord) || field_set(t.track) || field_set(t.pitch))
        return "Phrase token with chord/track/pitch set";
      if (t.beat != 0) return "Phrase token off bar boundary";
      return "";
    }
    case TokenType::Chord: {
      std::string v = pos_fields();
      if (!v.empty()) return v;
      if (!field_set(t.chord)) return "Chord token without symbol";
      if (field_set(t.track) || field_set(t.pitch)) return "Chord token with track/pitch set";
      return "";
    }
    case TokenType::Note: {
      std::string v = pos_fields();
      if (!v.empty()) return v;
      if (!field_set(t.track) || !field_set(t.pitch)) return "Note token missing track/pitch";
      return "";
    }
  }
  return "unknown token type";
}

}  // namespace detail

// Strict inverse of tokenize(). The token stream does not carry a title, so
// callers may pass one through. Throws MalformedSequence naming the first
// offending token.
inline Song detokenize(const TokenSeq& seq, const Vocabulary& vocab,
                       const std::string& title = "") {
  auto fail = [](int index, const std::string& why) {
    throw MalformedSequence(index, why);
  };
  if (seq.empty()) fail(0, "empty sequence");
  if (seq.front().type != TokenType::BOS) fail(0, "sequence must start with BOS");
  if (seq.back().type != TokenType::EOS)
    fail(static_cast<int>(seq.size()) - 1, "sequence must end with EOS");

  Song s;
  s.title = title;
  bool tempo_set = false;
  int tempo_bin = 0;
  int prev_onset = 0;

  for (size_t i = 1; i + 1 < seq.size(); ++i) {
    const Token& t = seq[i];
    const int idx = static_cast<int>(i);
    if (t.type == TokenType::BOS) fail(idx, "BOS inside sequence");
    if (t.type == TokenType::EOS) fail(idx, "EOS before end of sequence");
    std::string why = detail::applicability_violation(t);
    if (!why.empty()) fail(idx, why);

    if (!tempo_set) {
      tempo_bin = t.tempo;
      s.tempo_bpm = vocab.tempo_value(tempo_bin);
      tempo_set = true;
    } else if (t.tempo != tempo_bin) {
      fail(idx, "tempo bin changes mid-sequence");
    }
    int onset = t.onset();
    if (onset < prev_onset) fail(idx, "token onsets decrease");
    prev_onset = onset;

    switch (t.type) {
      case TokenType::Phrase: {
        if (t.phrase == kPlusPhraseId) {
          // Continuation of a split phrase: glue back onto the predecessor.
          if (s.phrases.empty()) fail(idx, "continuation phrase with no predecessor");
          PhraseSpan& prev = s.phrases.back();
          if (prev.end() != onset) fail(idx, "continuation phrase not contiguous");
          if (prev.bars() + t.duration > kMaxPhraseBars)
            fail(idx, "merged phrase exceeds 64 bars");
          prev.duration += t.duration * kStepsPerBar;
        } else {
          if (!s.phrases.empty() && s.phrases.back().end() > onset)
            fail(idx, "phrase overlaps predecessor");
          s.phrases.push_back({phrase_label_from_id(t.phrase), onset,
                               t.duration * kStepsPerBar});
        }
        break;
      }
      case TokenType::Chord: {
        if (!s.chords.empty() && s.chords.back().end() > onset)
          fail(idx, "chord overlaps predecessor");
        // Context field must agree with the spans decoded so far.
        int want = kIgnore;
        if (!s.phrases.empty() && onset >= s.phrases.back().onset &&
            onset < s.phrases.back().end())
          want = phrase_label_id(s.phrases.back().label);
        int got = (t.phrase == kPlusPhraseId) ? want : t.phrase;  // split context is erased by merge
        if (got != want) fail(idx, "chord phrase context disagrees with spans");
        s.chords.push_back({ChordSymbol::from_id(t.chord), onset, t.duration});
        break;
      }
      case TokenType::Note: {
        int want_p = kIgnore;
        if (!s.phrases.empty() && onset >= s.phrases.back().onset &&
            onset < s.phrases.back().end())
          want_p = phrase_label_id(s.phrases.back().label);
        int got_p = (t.phrase == kPlusPhraseId) ? want_p : t.phrase;
        if (got_p != want_p) fail(idx, "note phrase context disagrees with spans");
        if (want_p == kIgnore) fail(idx, "note onset not covered by a phrase");
        int want_c = kIgnore;
        if (!s.chords.empty() && onset >= s.chords.back().onset && onset < s.chords.back().end())
          want_c = s.chords.back().symbol.id();
        if (t.chord != want_c) fail(idx, "note chord context disagrees with spans");
        s.notes.push_back(
            {static_cast<TrackId>(t.track), t.pitch, onset, t.duration});
        break;
      }
      default:
        break;
    }
  }
  try {
    validate_song(s);
  } catch (const ValidationError& e) {
    fail(static_cast<int>(seq.size()) - 1, std::string("decoded song invalid: ") + e.what());
  }
  return s;
}

// Best-effort reconstruction of a model-generated sequence. Structural
// violations (no BOS) still throw; everything else is repaired and reported.
inline Song detokenize_lenient(const TokenSeq& seq, const Vocabulary& vocab,
                               std::vector<std::string>* warnings,
                               const std::string& title = "") {
  auto warn = [&](size_t i, const std::string& why) {
    if (warnings)
      warnings->push_back("token " + std::to_string(i) + ": " + why);
  };
  if (seq.empty() || seq.front().type != TokenType::BOS)
    throw MalformedSequence(0, "sequence must start with BOS");

  Song s;
  s.title = title;
  s.tempo_bpm = 120.0;
  bool tempo_set = false;
  int tempo_bin = -1;
  int prev_onset = 0;
  bool saw_eos = false;

  for (size_t i = 1; i < seq.size(); ++i) {
    const Token& t = seq[i];
    if (saw_eos) {
      warn(i, "token after EOS dropped");
      continue;
    }
    if (t.type == TokenType::EOS) {
      saw_eos = true;
      continue;
    }
    if (t.type == TokenType::BOS) {
      warn(i, "stray BOS dropped");
      continue;
    }
    std::string why = detail::applicability_violation(t);
    if (!why.empty()) {
      warn(i, why + "; token dropped");
      continue;
    }
    if (!tempo_set) {
      tempo_bin = t.tempo;
      s.tempo_bpm = vocab.tempo_value(tempo_bin);
      tempo_set = true;
    } else if (t.tempo != tempo_bin) {
      warn(i, "tempo bin changed mid-sequence; keeping the first");
    }
    int onset = t.onset();
    if (onset < prev_onset) {
      warn(i, "onset moves backwards; token dropped");
      continue;
    }
    prev_onset = onset;

    switch (t.type) {
      case TokenType::Phrase: {
        if (t.phrase == kPlusPhraseId) {
          if (!s.phrases.empty() && s.phrases.back().end() == onset &&
              s.phrases.back().bars() + t.duration <= kMaxPhraseBars) {
            s.phrases.back().duration += t.duration * kStepsPerBar;
          } else {
            warn(i, "orphan continuation phrase; relabelled 'x'");
            if (!s.phrases.empty() && s.phrases.back().end() > onset) {
              PhraseSpan& prev = s.phrases.back();
              prev.duration = onset - prev.onset;
              if (prev.duration <= 0) s.phrases.pop_back();
            }
            s.phrases.push_back({'x', onset, t.duration * kStepsPerBar});
          }
        } else {
          if (!s.phrases.empty() && s.phrases.back().end() > onset) {
            warn(i, "phrase overlaps predecessor; predecessor clipped");
            PhraseSpan& prev = s.phrases.back();
            prev.duration = onset - prev.onset;
            if (prev.duration <= 0) s.phrases.pop_back();
          }
          s.phrases.push_back({phrase_label_from_id(t.phrase), onset,
                               t.duration * kStepsPerBar});
        }
        break;
      }
      case TokenType::Chord: {
        if (!s.chords.empty() && s.chords.back().end() > onset) {
          warn(i, "chord overlaps predecessor; predecessor clipped");
          ChordSpan& prev = s.chords.back();
          prev.duration = onset - prev.onset;
          if (prev.duration <= 0) s.chords.pop_back();
        }
        s.chords.push_back({ChordSymbol::from_id(t.chord), onset, t.duration});
        break;
      }
      case TokenType::Note: {
        s.notes.push_back(
            {static_cast<TrackId>(t.track), t.pitch, onset, t.duration});
        break;
      }
      default:
        break;
    }
  }
  if (!saw_eos) warn(seq.size() - 1, "sequence has no EOS (truncated?)");

  // Coverage repair: every note onset needs a phrase; orphan note onsets in
  // chord gaps get explicit no-chord spans so downstream metrics see them.
  auto covered_by = [](int onset, const auto& spans) {
    for (const auto& sp : spans)
      if (onset >= sp.onset && onset < sp.end()) return true;
    return false;
  };
  std::vector<int> phrase_holes, chord_holes;
  for (const auto& n : s.notes) {
    if (!covered_by(n.onset, s.phrases)) phrase_holes.push_back(n.onset);
    if (!covered_by(n.onset, s.chords)) chord_holes.push_back(n.onset);
  }
  if (!phrase_holes.empty()) {
    // Accepted phrases are bar-aligned, so an uncovered onset means its whole
    // bar is uncovered; tile those bars with filler spans labelled 'x' and
    // merge adjacent bars up to the span cap.
    std::sort(phrase_holes.begin(), phrase_holes.end());
    std::vector<PhraseSpan> fill;
    for (int onset : phrase_holes) {
      int bar0 = (onset / kStepsPerBar) * kStepsPerBar;
      if (!fill.empty() && bar0 < fill.back().end()) continue;
      if (!fill.empty() && fill.back().end() == bar0 && fill.back().bars() < kMaxPhraseBars)
        fill.back().duration += kStepsPerBar;
      else
        fill.push_back({'x', bar0, kStepsPerBar});
    }
    for (const auto& p : fill) {
      warn(0, "synthesized filler phrase at step " + std::to_string(p.onset));
      s.phrases.push_back(p);
    }
  }
  if (!chord_holes.empty()) {
    std::sort(chord_holes.begin(), chord_holes.end());
    std::vector<ChordSpan> fill;
    for (int onset : chord_holes) {
      if (!fill.empty() && onset < fill.back().end()) continue;
      // Span from this onset up to the next real chord, capped at 64 steps.
      int end = onset + 1;
      for (const auto& c : s.chords)
        if (c.onset > onset) {
          end = std::max(end, std::min(c.onset, onset + kMaxChordSteps));
          break;
        }
      fill.push_back({ChordSymbol::none(), onset, end - onset});
    }
    for (const auto& c : fill) {
      warn(0, "synthesized no-chord span at step " + std::to_string(c.onset));
      s.chords.push_back(c);
    }
  }
  sort_song(s);
  try {
    validate_song(s);
  } catch (const ValidationError& e) {
    throw MalformedSequence(static_cast<int>(seq.size()) - 1,
                            std::string("unrepairable sequence: ") + e.what());
  }
  return s;
}

// --- Training preparation ----------------------------------------------------

// Split phrases containing more than `max_chords` Chord tokens. Each extra
// part starts at the bar of its first chord and is labelled with the
// continuation mark, so detokenize() merges the parts back exactly.
inline TokenSeq split_long_phrases(const TokenSeq& seq, int max_chords) {
  if (max_chords < 1) throw ValidationError("max_chords must be >= 1");
  const int n = static_cast<int>(seq.size());

  // Pass 1: pick split points. A split lands at the bar of the first chord
  // of each new part; the continuation token must be inserted before the
  // first token whose onset already lies in that bar (a mid-bar chord may
  // have same-bar notes in front of it), keeping the stream onset-sorted.
  struct Split {
    int insert_before;
    int bar;
  };
  std::vector<Split> splits;
  {
    int part_bar = -1;       // start bar of the current part, -1 outside phrases
    int phrase_index = -1;   // token index of the current group's Phrase token
    int chords_in_part = 0;
    for (int i = 0; i < n; ++i) {
      const Token& t = seq[i];
      if (t.type == TokenType::Phrase) {
        part_bar = t.bar;
        phrase_index = i;
        chords_in_part = 0;
        continue;
      }
      if (t.type != TokenType::Chord || phrase_index < 0) continue;
      if (chords_in_part == max_chords) {
        int split_bar = t.bar;
        if (split_bar <= part_bar)
          throw ValidationError("cannot split phrase: too many chords within one bar");
        int at = i;
        while (at - 1 > phrase_index && at - 1 > (splits.empty() ? -1 : splits.back().insert_before) &&
               seq[at - 1].onset() >= split_bar * kStepsPerBar)
          --at;
        splits.push_back({at, split_bar});
        part_bar = split_bar;
        chords_in_part = 0;
      }
      ++chords_in_part;
    }
  }
  if (splits.empty()) return seq;

  // Pass 2: rebuild, rewriting part durations and the phrase-context field
  // of tokens that migrate into a continuation part.
  TokenSeq out;
  out.reserve(seq.size() + splits.size());
  size_t next_split = 0;
  int cur_part_token = -1;  // index in `out` of the open part's Phrase token
  int cur_part_bar = 0;
  int cur_end_bar = 0;
  bool in_continuation = false;

  for (int i = 0; i < n; ++i) {
    while (next_split < splits.size() && splits[next_split].insert_before == i) {
      int split_bar = splits[next_split].bar;
      out[cur_part_token].duration = split_bar - cur_part_bar;
      Token plus;
      plus.type = TokenType::Phrase;
      plus.bar = split_bar;
      plus.beat = 0;
      plus.tempo = seq[i].tempo;
      plus.phrase = kPlusPhraseId;
      plus.duration = cur_end_bar - split_bar;
      out.push_back(plus);
      cur_part_token = static_cast<int>(out.size()) - 1;
      cur_part_bar = split_bar;
      in_continuation = true;
      ++next_split;
    }
    Token tok = seq[i];
    if (tok.type == TokenType::Phrase) {
      cur_part_token = static_cast<int>(out.size());
      cur_part_bar = tok.bar;
      cur_end_bar = tok.bar + tok.duration;
      in_continuation = false;
    } else if (in_continuation &&
               (tok.type == TokenType::Chord || tok.type == TokenType::Note)) {
      tok.phrase = kPlusPhraseId;
    }
    out.push_back(tok);
  }
  return out;
}

// Keep at most `max_phrases` phrase groups (continuation parts count as
// groups of their own); drop the rest and close with EOS.
inline TokenSeq truncate_phrases(const TokenSeq& seq, int max_phrases) {
  if (max_phrases < 1) throw ValidationError("max_phrases must be >= 1");
  int count = 0;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (seq[i].type != TokenType::Phrase) continue;
    ++count;
    if (count > max_phrases) {
      TokenSeq out(seq.begin(), seq.begin() + i);
      out.push_back(Token::eos());
      return out;
    }
  }
  return seq;
}

// Cap total length, cutting only at a phrase boundary so HSE grouping
// survives. Result always ends with EOS and has size <= max_len.
inline TokenSeq truncate_to_length(const TokenSeq& seq, int max_len) {
  if (max_len < 2) throw ValidationError("max_len must be >= 2");
  if (static_cast<int>(seq.size()) <= max_len) return seq;
  int cut = -1;
  for (size_t i = 0; i < seq.size(); ++i)
    if (seq[i].type == TokenType::Phrase && static_cast<int>(i) + 1 <= max_len)
      cut = static_cast<int>(i);
  if (cut <= 0) return {Token::bos(), Token::eos()};
  TokenSeq out(seq.begin(), seq.begin() + cut);
  out.push_back(Token::eos());
  return out;
}

// --- Token files --------------------------------------------------------------
//
//   vocab_hash=<hex>
//   <9 space-separated dense indices per line>

inline void write_tokens(const TokenSeq& seq, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "vocab_hash=" << to_hex(vocab.hash()) << "\n";
  for (const Token& t : seq) {
    auto idx = vocab.encode(t);
    for (int c = 0; c < kNumCategories; ++c) out << (c ? " " : "") << idx[c];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TokenSeq read_tokens(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty token file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("vocab_hash=", 0) != 0) throw ParseError(path + ": missing vocab_hash header");
  if (line.substr(11) != to_hex(vocab.hash()))
    throw ParseError(path + ": vocabulary hash mismatch");
  TokenSeq seq;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tok = split_ws(line);
    if (tok.size() != kNumCategories)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 9 indices");
    std::array<int, kNumCategories> idx{};
    for (int c = 0; c < kNumCategories; ++c) {
      try {
        size_t pos = 0;
        idx[c] = std::stoi(tok[c], &pos);
        if (pos != tok[c].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad index '" + tok[c] + "'");
      }
    }
    seq.push_back(vocab.decode(idx));
  }
  return seq;
}

}  // namespace hat
