// In-memory representation of an annotated pop song plus its text
// interchange format. Time is an integer grid of 16th-note steps, 16 steps
// per 4/4 bar. Phrase spans are bar-aligned and cover every note onset;
// chord spans are non-overlapping. Span durations are capped so the token
// layer can carry them losslessly (chords <= 64 steps, phrases <= 64 bars).
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hat/common.hpp"

namespace hat {

constexpr int kStepsPerBar = 16;   // 4/4 at 16th-note resolution
constexpr int kMaxNoteDuration = 64;
constexpr int kMaxChordSteps = 64;
constexpr int kMaxPhraseBars = 64;

enum class TrackId : int { PM = 0, SM = 1, HRS = 2 };

inline const char* track_name(TrackId t) {
  switch (t) {
    case TrackId::PM: return "PM";
    case TrackId::SM: return "SM";
    default: return "HRS";
  }
}

inline std::optional<TrackId> track_from_name(const std::string& s) {
  if (s == "PM") return TrackId::PM;
  if (s == "SM") return TrackId::SM;
  if (s == "HRS") return TrackId::HRS;
  return std::nullopt;
}

enum class ChordQuality : int {
  Maj = 0, Min, Dim, Aug, Sus2, Sus4, Dom7, Maj7, Min7,
};

constexpr int kNumChordQualities = 9;
constexpr int kNumChordSymbols = 12 * kNumChordQualities + 1;  // + no-chord

inline const char* quality_name(ChordQuality q) {
  static const char* names[kNumChordQualities] = {
      "maj", "min", "dim", "aug", "sus2", "sus4", "7", "maj7", "min7"};
  return names[static_cast<int>(q)];
}

inline const char* pitch_class_name(int pc) {
  static const char* names[12] = {"C",  "C#", "D",  "D#", "E",  "F",
                                  "F#", "G",  "G#", "A",  "A#", "B"};
  return names[pc];
}

// Chord label: root pitch class 0-11 x quality, or N for no-chord.
struct ChordSymbol {
  int root = 0;  // pitch class, ignored when is_none
  ChordQuality quality = ChordQuality::Maj;
  bool is_none = false;

  static ChordSymbol none() {
    ChordSymbol c;
    c.is_none = true;
    return c;
  }

  // Dense id in [0, kNumChordSymbols): root*9 + quality, N last.
  int id() const {
    return is_none ? kNumChordSymbols - 1 : root * kNumChordQualities + static_cast<int>(quality);
  }

  static ChordSymbol from_id(int id) {
    if (id < 0 || id >= kNumChordSymbols) throw ValidationError("chord id out of range");
    if (id == kNumChordSymbols - 1) return none();
    ChordSymbol c;
    c.root = id / kNumChordQualities;
    c.quality = static_cast<ChordQuality>(id % kNumChordQualities);
    return c;
  }

  std::string str() const {
    if (is_none) return "N";
    return std::string(pitch_class_name(root)) + ":" + quality_name(quality);
  }

  static ChordSymbol parse(const std::string& s) {
    if (s == "N") return none();
    auto colon = s.find(':');
    if (colon == std::string::npos) throw ParseError("bad chord symbol: " + s);
    std::string root_s = s.substr(0, colon);
    std::string qual_s = s.substr(colon + 1);
    ChordSymbol c;
    bool found = false;
    for (int pc = 0; pc < 12; ++pc) {
      if (root_s == pitch_class_name(pc)) {
        c.root = pc;
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("bad chord root: " + s);
    found = false;
    for (int q = 0; q < kNumChordQualities; ++q) {
      if (qual_s == quality_name(static_cast<ChordQuality>(q))) {
        c.quality = static_cast<ChordQuality>(q);
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("bad chord quality: " + s);
    return c;
  }

  bool operator==(const ChordSymbol& o) const {
    if (is_none != o.is_none) return false;
    if (is_none) return true;
    return root == o.root && quality == o.quality;
  }
  bool operator!=(const ChordSymbol& o) const { return !(*this == o); }
};

struct Note {
  TrackId track = TrackId::PM;
  int pitch = 60;     // MIDI pitch [0,127]
  int onset = 0;      // 16th-note steps from song start
  int duration = 1;   // 16th-note steps [1,64]

  bool operator==(const Note&) const = default;
};

struct ChordSpan {
  ChordSymbol symbol;
  int onset = 0;
  int duration = 1;  // steps, [1,64]

  int end() const { return onset + duration; }
  bool operator==(const ChordSpan&) const = default;
};

// Phrase label: A-Z melodic, a-z non-melodic. Dense ids 0..51.
constexpr int kNumPhraseLabels = 52;

inline bool is_phrase_label(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
}

inline int phrase_label_id(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return 26 + (c - 'a');
  throw ValidationError(std::string("bad phrase label: ") + c);
}

inline char phrase_label_from_id(int id) {
  if (id < 0 || id >= kNumPhraseLabels) throw ValidationError("phrase label id out of range");
  return id < 26 ? static_cast<char>('A' + id) : static_cast<char>('a' + id - 26);
}

struct PhraseSpan {
  char label = 'A';
  int onset = 0;     // bar-aligned step
  int duration = 1;  // steps, bar-aligned, <= 64 bars

  int end() const { return onset + duration; }
  int bars() const { return duration / kStepsPerBar; }
  bool operator==(const PhraseSpan&) const = default;
};

struct Song {
  std::string title;
  double tempo_bpm = 120.0;  // single scalar; first tempo mark wins
  // time signature is fixed 4/4, resolution 16 steps/bar
  std::vector<Note> notes;
  std::vector<ChordSpan> chords;
  std::vector<PhraseSpan> phrases;

  bool operator==(const Song&) const = default;

  // Last occupied step over all content, used for groove frames and repairs.
  int end_step() const {
    int end = 0;
    for (const auto& n : notes) end = std::max(end, n.onset + n.duration);
    for (const auto& c : chords) end = std::max(end, c.end());
    for (const auto& p : phrases) end = std::max(end, p.end());
    return end;
  }
};

namespace detail {

inline bool note_order(const Note& a, const Note& b) {
  if (a.onset != b.onset) return a.onset < b.onset;
  if (a.track != b.track) return static_cast<int>(a.track) < static_cast<int>(b.track);
  if (a.pitch != b.pitch) return a.pitch < b.pitch;
  return a.duration < b.duration;
}

}  // namespace detail

// Canonical ordering expected by validate() and produced by tokenization.
inline void sort_song(Song& s) {
  std::sort(s.notes.begin(), s.notes.end(), detail::note_order);
  std::sort(s.chords.begin(), s.chords.end(),
            [](const ChordSpan& a, const ChordSpan& b) { return a.onset < b.onset; });
  std::sort(s.phrases.begin(), s.phrases.end(),
            [](const PhraseSpan& a, const PhraseSpan& b) { return a.onset < b.onset; });
}

inline void validate_song(const Song& s) {
  if (!(s.tempo_bpm > 0.0)) throw ValidationError("tempo must be positive");
  if (s.title.find('\n') != std::string::npos) throw ValidationError("title contains newline");

  for (const auto& n : s.notes) {
    if (n.pitch < 0 || n.pitch > 127) throw ValidationError("note pitch out of [0,127]");
    if (n.onset < 0) throw ValidationError("note onset negative");
    if (n.duration < 1 || n.duration > kMaxNoteDuration)
      throw ValidationError("note duration out of [1,64]");
  }
  if (!std::is_sorted(s.notes.begin(), s.notes.end(), [](const Note& a, const Note& b) {
        return a.onset < b.onset;
      }))
    throw ValidationError("notes not sorted by onset");

  for (size_t i = 0; i < s.chords.size(); ++i) {
    const auto& c = s.chords[i];
    if (c.onset < 0) throw ValidationError("chord onset negative");
    if (c.duration < 1 || c.duration > kMaxChordSteps)
      throw ValidationError("chord duration out of [1,64] steps");
    if (i > 0) {
      if (s.chords[i - 1].onset > c.onset) throw ValidationError("chords not sorted");
      if (s.chords[i - 1].end() > c.onset) throw ValidationError("chords overlap");
    }
  }

  for (size_t i = 0; i < s.phrases.size(); ++i) {
    const auto& p = s.phrases[i];
    if (!is_phrase_label(p.label)) throw ValidationError("bad phrase label");
    if (p.onset < 0) throw ValidationError("phrase onset negative");
    if (p.onset % kStepsPerBar != 0 || p.duration % kStepsPerBar != 0)
      throw ValidationError("phrase not aligned to bar boundaries");
    if (p.duration < kStepsPerBar || p.bars() > kMaxPhraseBars)
      throw ValidationError("phrase duration out of [1,64] bars");
    if (i > 0) {
      if (s.phrases[i - 1].onset > p.onset) throw ValidationError("phrases not sorted");
      if (s.phrases[i - 1].end() > p.onset) throw ValidationError("phrases overlap");
    }
  }

  for (const auto& n : s.notes) {
    bool covered = false;
    for (const auto& p : s.phrases) {
      if (n.onset >= p.onset && n.onset < p.end()) {
        covered = true;
        break;
      }
    }
    if (!covered) throw ValidationError("note onset not covered by any phrase");
  }
}

// --- Interchange format -----------------------------------------------------
//
//   title=<text>
//   tempo=<bpm>
//   timesig=4/4
//   P <label> <onset> <duration>
//   C <symbol> <onset> <duration>
//   N <track> <pitch> <onset> <duration>
//
// Records of each class must be sorted by onset. The writer emits P, C, N
// blocks in that order, so two saves of the same song are byte-identical.

inline std::string song_to_text(const Song& s) {
  validate_song(s);
  std::ostringstream out;
  out << "title=" << s.title << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", s.tempo_bpm);
  out << "tempo=" << buf << "\n";
  out << "timesig=4/4\n";
  for (const auto& p : s.phrases)
    out << "P " << p.label << " " << p.onset << " " << p.duration << "\n";
  for (const auto& c : s.chords)
    out << "C " << c.symbol.str() << " " << c.onset << " " << c.duration << "\n";
  for (const auto& n : s.notes)
    out << "N " << track_name(n.track) << " " << n.pitch << " " << n.onset << " " << n.duration
        << "\n";
  return out.str();
}

inline Song song_from_text(const std::string& text) {
  Song s;
  bool saw_title = false, saw_tempo = false, saw_timesig = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto parse_int = [&](const std::string& tok) {
    size_t pos = 0;
    int v;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad integer '" + tok + "'");
    }
    if (pos != tok.size())
      throw ParseError("line " + std::to_string(lineno) + ": bad integer '" + tok + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("title=", 0) == 0) {
      if (!saw_title) {
        s.title = line.substr(6);
        saw_title = true;
      }
      continue;
    }
    if (line.rfind("tempo=", 0) == 0) {
      // Keep only the first tempo mark.
      if (!saw_tempo) {
        try {
          s.tempo_bpm = std::stod(line.substr(6));
        } catch (const std::exception&) {
          throw ParseError("line " + std::to_string(lineno) + ": bad tempo");
        }
        saw_tempo = true;
      }
      continue;
    }
    if (line.rfind("timesig=", 0) == 0) {
      if (line.substr(8) != "4/4")
        throw ValidationError("line " + std::to_string(lineno) + ": only 4/4 songs are accepted");
      saw_timesig = true;
      continue;
    }
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "N") {
      if (tok.size() != 5) throw ParseError("line " + std::to_string(lineno) + ": bad N record");
      auto tr = track_from_name(tok[1]);
      if (!tr) throw ParseError("line " + std::to_string(lineno) + ": bad track " + tok[1]);
      s.notes.push_back({*tr, parse_int(tok[2]), parse_int(tok[3]), parse_int(tok[4])});
    } else if (tok[0] == "C") {
      if (tok.size() != 4) throw ParseError("line " + std::to_string(lineno) + ": bad C record");
      s.chords.push_back({ChordSymbol::parse(tok[1]), parse_int(tok[2]), parse_int(tok[3])});
    } else if (tok[0] == "P") {
      if (tok.size() != 4) throw ParseError("line " + std::to_string(lineno) + ": bad P record");
      if (tok[1].size() != 1 || !is_phrase_label(tok[1][0]))
        throw ParseError("line " + std::to_string(lineno) + ": bad phrase label " + tok[1]);
      s.phrases.push_back({tok[1][0], parse_int(tok[2]), parse_int(tok[3])});
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": unknown record '" + tok[0] + "'");
    }
  }
  if (!saw_tempo) throw ParseError("missing tempo= header");
  if (!saw_timesig) throw ParseError("missing timesig= header");
  validate_song(s);
  return s;
}

inline Song load_song(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return song_from_text(buf.str());
}

inline void save_song(const Song& s, const std::string& path) {
  std::string text = song_to_text(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// --- Quantization -----------------------------------------------------------

// A song whose onsets/durations are raw MIDI ticks.
struct TickSong {
  std::string title;
  double tempo_bpm = 120.0;
  int ticks_per_quarter = 480;
  std::vector<Note> notes;          // onset/duration in ticks
  std::vector<ChordSpan> chords;    // onset/duration in ticks
  std::vector<PhraseSpan> phrases;  // onset/duration in ticks
};

namespace detail {

// Round ticks to the nearest 16th-note step (4 steps per quarter),
// half away from zero.
inline int ticks_to_steps(long long ticks, int tpq) {
  long long num = ticks * 4;
  if (num >= 0) return static_cast<int>((2 * num + tpq) / (2LL * tpq));
  return -static_cast<int>((2 * -num + tpq) / (2LL * tpq));
}

}  // namespace detail

// Snap everything to the 16th grid. Zero-length results are clamped to one
// step; note durations cap at the grid maximum; chord spans longer than the
// cap are split into consecutive spans of the same symbol.
inline Song quantize_song(const TickSong& raw) {
  if (raw.ticks_per_quarter <= 0) throw ValidationError("unknown ticks-per-quarter");
  const int tpq = raw.ticks_per_quarter;
  Song s;
  s.title = raw.title;
  s.tempo_bpm = raw.tempo_bpm;
  for (const auto& n : raw.notes) {
    Note q = n;
    q.onset = detail::ticks_to_steps(n.onset, tpq);
    q.duration = std::clamp(detail::ticks_to_steps(n.duration, tpq), 1, kMaxNoteDuration);
    s.notes.push_back(q);
  }
  for (const auto& c : raw.chords) {
    int onset = detail::ticks_to_steps(c.onset, tpq);
    int dur = std::max(1, detail::ticks_to_steps(c.duration, tpq));
    while (dur > kMaxChordSteps) {
      s.chords.push_back({c.symbol, onset, kMaxChordSteps});
      onset += kMaxChordSteps;
      dur -= kMaxChordSteps;
    }
    s.chords.push_back({c.symbol, onset, dur});
  }
  for (const auto& p : raw.phrases) {
    PhraseSpan q = p;
    q.onset = detail::ticks_to_steps(p.onset, tpq);
    q.duration = std::max(1, detail::ticks_to_steps(p.duration, tpq));
    s.phrases.push_back(q);
  }
  sort_song(s);
  return s;
}

}  // namespace hat
