// Shipping gate. Each numbered check prints one PASS/FAIL line (or SKIPPED
// when its input data isn't available) and the binary exits nonzero if any
// check fails. The checks are deliberately self-contained: metric oracles
// are re-derived here by brute force instead of reusing the library's own
// hashing/counting shortcuts.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hat/cli.hpp"
#include "test_util.hpp"

using namespace hat;
using testutil::grid_song;
using testutil::random_song;

namespace {

int g_failed = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d. %s%s%s\n", ok ? "PASS" : "FAIL", id, name,
              detail.empty() ? "" : " — ", detail.c_str());
  if (!ok) g_failed += 1;
}

void report_skip(int id, const char* name, const std::string& why) {
  std::printf("[SKIP] %2d. %s — %s\n", id, name, why.c_str());
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt_secs(const Timer& t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", t.secs());
  return buf;
}

// --- Brute-force metric oracles ---------------------------------------------
// Straight loops over the definitions; no sets, maps or incremental state.

std::vector<std::vector<uint8_t>> oracle_grooves(const Song& s,
                                                 const std::array<bool, 3>& tracks) {
  std::vector<std::vector<uint8_t>> out;
  for (const ChordSpan& c : s.chords) {
    std::vector<uint8_t> bits(static_cast<size_t>(c.duration), 0);
    for (const Note& n : s.notes) {
      if (!tracks[static_cast<int>(n.track)]) continue;
      if (n.onset >= c.onset && n.onset < c.onset + c.duration) bits[n.onset - c.onset] = 1;
    }
    out.push_back(bits);
  }
  return out;
}

std::optional<double> oracle_ags(const Song& s, const std::array<bool, 3>& tracks) {
  auto g = oracle_grooves(s, tracks);
  double sum = 0;
  int pairs = 0;
  for (size_t i = 0; i + 1 < g.size(); ++i) {
    if (g[i].size() != g[i + 1].size()) continue;
    int xr = 0, orr = 0;
    for (size_t k = 0; k < g[i].size(); ++k) {
      xr += g[i][k] ^ g[i + 1][k];
      orr += g[i][k] | g[i + 1][k];
    }
    if (orr == 0) continue;
    sum += 1.0 - static_cast<double>(xr) / static_cast<double>(orr);
    pairs += 1;
  }
  if (pairs == 0) return std::nullopt;
  return sum / pairs;
}

bool window_seen_before(const std::vector<int>& ids, int i, int n) {
  for (int j = 0; j < i; ++j)
    if (std::equal(ids.begin() + i, ids.begin() + i + n, ids.begin() + j)) return true;
  return false;
}

double oracle_cpi(const std::vector<int>& ids, int n) {
  const int total = static_cast<int>(ids.size()) - n + 1;
  int uniq = 0;
  for (int i = 0; i < total; ++i) uniq += window_seen_before(ids, i, n) ? 0 : 1;
  return static_cast<double>(uniq) / static_cast<double>(total);
}

double oracle_conditional(const std::vector<std::vector<int>>& corpus,
                          const std::vector<int>& gram) {
  const int n = static_cast<int>(gram.size());
  long num = 0, den = 0;
  for (const auto& seq : corpus)
    for (int i = 0; i + n <= static_cast<int>(seq.size()); ++i) {
      if (std::equal(gram.begin(), gram.end() - 1, seq.begin() + i)) den += 1;
      if (std::equal(gram.begin(), gram.end(), seq.begin() + i)) num += 1;
    }
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double oracle_cpvr(const std::vector<int>& ids, const std::vector<std::vector<int>>& corpus,
                   int n) {
  double sum = 0;
  int firsts = 0;
  for (int i = 0; i + n <= static_cast<int>(ids.size()); ++i) {
    if (window_seen_before(ids, i, n)) continue;
    sum += oracle_conditional(corpus, std::vector<int>(ids.begin() + i, ids.begin() + i + n));
    firsts += 1;
  }
  return sum / firsts;  // position 0 is always a first appearance
}

std::vector<int> random_ids(Rng& rng, int len, int alphabet) {
  std::vector<int> ids(static_cast<size_t>(len));
  for (int& x : ids) x = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(alphabet)));
  return ids;
}

// --- Shared model helpers ----------------------------------------------------

HATConfig tiny_config() {
  HATConfig c;
  c.dim = 16;
  c.emb_dims = {2, 2, 2, 1, 2, 3, 2, 1, 1};
  c.song_layers = 1;
  c.song_heads = 2;
  c.texture_layers = 1;
  c.texture_heads = 2;
  c.form_layers = 1;
  c.form_heads = 2;
  return c;
}

using Dists = std::array<Tensor<double>, kNumCategories>;

// Per-position output distributions of the batch forward, ground-truth types
// injected into the second stage.
Dists batch_dists(HATParameters<double>& P, const HATConfig& cfg, const Vocabulary& vocab,
                  const TokenSeq& toks) {
  const int len = static_cast<int>(toks.size());
  Tape<double> tp;
  auto ctx = tp.slice_rows(hat_states(tp, P, cfg, vocab, toks), 0, len - 1);
  std::vector<int> types(static_cast<size_t>(len - 1));
  for (int i = 0; i + 1 < len; ++i) types[i] = static_cast<int>(toks[i + 1].type);
  auto heads = predict_heads(tp, P, ctx, types);
  Dists out;
  out[0] = softmax_rows(tp.value(heads.type_logits));
  for (int c = 1; c < kNumCategories; ++c)
    out[c] = softmax_rows(tp.value(heads.cat_logits[c - 1]));
  return out;
}

bool rows_identical(const Tensor<double>& a, const Tensor<double>& b, int row) {
  return std::equal(a.row(row), a.row(row) + a.cols, b.row(row));
}

// Ten 4-bar phrases, four chords and 25 notes each: 302 tokens.
Song long_song(const Vocabulary& v) {
  Song s;
  s.tempo_bpm = v.tempo_value(12);
  for (int i = 0; i < 10; ++i) {
    const int onset = i * 4 * kStepsPerBar;
    s.phrases.push_back({static_cast<char>('A' + i % 3), onset, 4 * kStepsPerBar});
    for (int j = 0; j < 4; ++j)
      s.chords.push_back({ChordSymbol::from_id((5 * i + j) % kNumChordSymbols),
                          onset + j * kStepsPerBar, kStepsPerBar});
    for (int k = 0; k < 25; ++k)
      s.notes.push_back(
          {static_cast<TrackId>(k % 3), 40 + (3 * k + i) % 60, onset + 2 * k, 2});
  }
  sort_song(s);
  validate_song(s);
  return s;
}

// --- 1. metric oracle equivalence ---------------------------------------------

void check_1_metric_oracles() {
  Timer timer;
  Vocabulary v;
  Rng rng(1001);
  bool ok = true;
  double worst = 0;

  for (int trial = 0; trial < 1000 && ok; ++trial) {
    Song s = random_song(rng, v);
    const bool acc_only = rng.uniform() < 0.3;
    GrooveFilter f;
    std::array<bool, 3> tracks = {true, true, true};
    if (acc_only) {
      f = GrooveFilter::accompaniment();
      tracks = {false, true, true};
    }
    // bit vectors must agree exactly
    auto got = extract_grooves(s, f);
    auto want = oracle_grooves(s, tracks);
    ok = ok && got.size() == want.size();
    for (size_t i = 0; ok && i < got.size(); ++i)
      ok = std::equal(want[i].begin(), want[i].end(), got[i].second.bits.begin(),
                      got[i].second.bits.end());
    auto a = ags(s, f);
    auto b = oracle_ags(s, tracks);
    ok = ok && a.has_value() == b.has_value();
    if (ok && a.has_value()) {
      worst = std::max(worst, std::fabs(*a - *b));
      ok = std::fabs(*a - *b) <= 1e-12;
    }
  }

  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(4));
    auto ids = random_ids(rng, n + static_cast<int>(rng.uniform_int(36)), 6);
    ok = cpi(ids, n) == oracle_cpi(ids, n);  // pure count ratio: exact
  }

  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(3));
    std::vector<std::vector<int>> corpus;
    for (int k = 0; k < 3 + static_cast<int>(rng.uniform_int(4)); ++k)
      corpus.push_back(random_ids(rng, n + static_cast<int>(rng.uniform_int(25)), 5));
    auto ids = random_ids(rng, n + static_cast<int>(rng.uniform_int(25)), 5);
    NGramModel model = build_ngram_model(corpus, n);
    const double lam = rng.uniform();
    const double d_vr = std::fabs(cpvr(ids, model, n) - oracle_cpvr(ids, corpus, n));
    const double d_r = std::fabs(cpr(ids, model, n, lam) -
                                 (lam * oracle_cpi(ids, n) +
                                  (1.0 - lam) * oracle_cpvr(ids, corpus, n)));
    worst = std::max(worst, std::max(d_vr, d_r));
    ok = d_vr <= 1e-12 && d_r <= 1e-12;
  }

  ok = ok && timer.secs() < 10.0;
  std::ostringstream d;
  d << "1000 instances per metric, max |err| " << worst << ", " << fmt_secs(timer);
  report(1, "metric oracle equivalence", ok, d.str());
}

// --- 2. hand-worked metric values ----------------------------------------------

void check_2_hand_values() {
  bool ok = true;

  GrooveVector a{{1, 0, 1, 0}}, b{{1, 1, 0, 0}};
  ok = ok && std::fabs(ags_pair(a, b) - 1.0 / 3.0) <= 1e-15;

  // C G Am F twice: 7 bigrams, 4 distinct
  auto id = [](const char* sym) { return ChordSymbol::parse(sym).id(); };
  std::vector<int> prog = {id("C:maj"), id("G:maj"), id("A:min"), id("F:maj")};
  prog.insert(prog.end(), prog.begin(), prog.begin() + 4);
  ok = ok && cpi(prog, 2) == 4.0 / 7.0;

  std::vector<std::vector<int>> corpus = {prog, {id("C:maj"), id("E:min"), id("F:maj")}};
  NGramModel m = build_ngram_model(corpus, 2);
  ok = ok && cpr(prog, m, 2, 1.0) == cpi(prog, 2);
  ok = ok && cpr(prog, m, 2, 0.0) == cpvr(prog, m, 2);

  report(2, "hand-worked metric values", ok, "ags_pair 1/3, cpi 4/7, cpr endpoints");
}

// --- 3. paper-number reproduction (needs the real dataset) ----------------------

void check_3_paper_numbers() {
  const char* env = std::getenv("POP909_DIR");
  std::string dir = env != nullptr ? env : "POP909";
  if (!std::filesystem::is_directory(dir)) {
    report_skip(3, "paper-number reproduction",
                "POP909 with phrase annotations not present (set POP909_DIR to a "
                "directory of converted .song files); criteria 1-2 stand in");
    return;
  }

  Vocabulary v;
  std::vector<Song> songs;
  for (const auto& f : cli::list_files(dir, ".song")) songs.push_back(load_song(f.string()));
  double ags_sum = 0;
  long ags_n = 0;
  std::vector<ChordIds> corpus;
  for (const Song& s : songs) {
    if (auto g = ags(s, GrooveFilter::accompaniment()); g.has_value()) {
      ags_sum += *g;
      ags_n += 1;
    }
    corpus.push_back(chord_ids(s));
  }
  NGramModel m = build_ngram_model(corpus, 2);
  double cpr_sum = 0;
  long cpr_n = 0;
  for (const ChordIds& ids : corpus)
    if (static_cast<int>(ids.size()) >= 2) {
      cpr_sum += cpr(ids, m, 2, 0.5);
      cpr_n += 1;
    }
  if (ags_n == 0 || cpr_n == 0) {
    report(3, "paper-number reproduction", false, "dataset present but unusable");
    return;
  }
  const double real_ags = ags_sum / static_cast<double>(ags_n);
  const double real_cpr = cpr_sum / static_cast<double>(cpr_n);
  const bool ok =
      std::fabs(real_ags - 0.572) <= 0.02 && std::fabs(real_cpr - 0.504) <= 0.02;
  std::ostringstream d;
  d << "real AGS " << real_ags << " (want 0.572±0.02), 2-gram CPR " << real_cpr
    << " (want 0.504±0.02) over " << songs.size() << " songs";
  report(3, "paper-number reproduction", ok, d.str());
}

// --- 4. tokenizer roundtrip ------------------------------------------------------

void check_4_roundtrip() {
  Vocabulary v;
  Rng rng(404);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    testutil::SongShape shape;
    shape.max_bars = 3 + static_cast<int>(rng.uniform_int(10));
    shape.max_notes = 5 + static_cast<int>(rng.uniform_int(40));
    Song s = random_song(rng, v, shape);
    if (!(detokenize(tokenize(s, v), v, s.title) == s)) mismatches += 1;
  }
  report(4, "tokenizer roundtrip", mismatches == 0,
         "50 property-generated songs, " + std::to_string(mismatches) + " mismatches");
}

// --- 5. causality -----------------------------------------------------------------

void check_5_causality() {
  Timer timer;
  Vocabulary v;
  HATConfig cfg;  // dim 64, two layers in each stack, full variant
  Rng init_rng(5);
  auto P = init_hat<double>(cfg, v, init_rng);

  Rng rng(505);
  std::vector<TokenSeq> pool;
  std::vector<Dists> base;
  for (int i = 0; i < 8; ++i) {
    pool.push_back(prepare_for_training(tokenize(random_song(rng, v), v), cfg));
    base.push_back(batch_dists(P, cfg, v, pool.back()));
  }

  bool ok = true;
  long rows_checked = 0;
  for (int pair = 0; pair < 200 && ok; ++pair) {
    const int si = static_cast<int>(rng.uniform_int(pool.size()));
    TokenSeq toks = pool[si];
    const int len = static_cast<int>(toks.size());
    const int j = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(len - 2)));

    Token& t = toks[j];  // same type, different content: grouping is untouched
    switch (t.type) {
      case TokenType::Note:
        t.pitch = (t.pitch + 7) % 128;
        break;
      case TokenType::Chord:
        t.chord = (t.chord + 13) % kNumChordSymbols;
        break;
      case TokenType::Phrase:
        t.duration = t.duration % 64 + 1;
        break;
      default:
        continue;  // BOS/EOS never sit strictly inside the sequence
    }

    Dists got = batch_dists(P, cfg, v, toks);
    for (int c = 0; c < kNumCategories && ok; ++c)
      for (int r = 0; r < j && ok; ++r) {
        ok = rows_identical(base[si][c], got[c], r);
        rows_checked += 1;
      }
  }

  ok = ok && timer.secs() < 60.0;
  std::ostringstream d;
  d << "200 (sequence, j) pairs, " << rows_checked << " rows bit-compared, "
    << fmt_secs(timer);
  report(5, "causality under token perturbation", ok, d.str());
}

// --- 6. incremental/batch equivalence -----------------------------------------------

void check_6_incremental() {
  Timer timer;
  Vocabulary v;
  HATConfig cfg;
  Rng init_rng(6);
  auto P = init_hat<double>(cfg, v, init_rng);

  TokenSeq full = tokenize(long_song(v), v);
  TokenSeq prompt(full.begin(), full.begin() + 300);
  const int len = static_cast<int>(prompt.size());

  // incremental side: per-token structure bookkeeping, then the top stack
  auto rp = replay_prompt(P, cfg, v, prompt);
  Tensor<double> M(len, cfg.dim);
  for (int i = 0; i < len; ++i)
    std::copy(rp.rows[i].data.begin(), rp.rows[i].data.end(), M.row(i));
  Tape<double> ti;
  auto inc_ctx = ti.slice_rows(top_song_forward(ti, P, cfg, ti.input(M)), 0, len - 1);
  std::vector<int> types(static_cast<size_t>(len - 1));
  for (int i = 0; i + 1 < len; ++i) types[i] = static_cast<int>(prompt[i + 1].type);
  auto inc_heads = predict_heads(ti, P, inc_ctx, types);
  Dists inc;
  inc[0] = softmax_rows(ti.value(inc_heads.type_logits));
  for (int c = 1; c < kNumCategories; ++c)
    inc[c] = softmax_rows(ti.value(inc_heads.cat_logits[c - 1]));

  Dists bat = batch_dists(P, cfg, v, prompt);

  double worst = 0;
  for (int c = 0; c < kNumCategories; ++c)
    for (size_t k = 0; k < bat[c].data.size(); ++k)
      worst = std::max(worst, std::fabs(bat[c].data[k] - inc[c].data[k]));

  std::ostringstream d;
  d << "300-token prefix, max |Δp| " << worst << " (bound 1e-12 at 64-bit), "
    << fmt_secs(timer);
  report(6, "incremental/batch equivalence", worst <= 1e-12, d.str());
}

// --- 7. gradient check ---------------------------------------------------------------

void check_7_gradcheck() {
  Timer timer;
  Vocabulary v;
  HATConfig cfg = tiny_config();
  TokenSeq toks = tokenize(grid_song(v, 2, 2), v);

  // grad_check's noise floor assumes an O(1) objective; normalize the summed
  // loss down to the per-position uniform level.
  double norm = 0;
  for (int c = 0; c < kNumCategories; ++c)
    norm += cfg.loss_weights[c] *
            std::log(static_cast<double>(v.size(static_cast<Category>(c))));
  norm *= static_cast<double>(toks.size() - 1);

  bool ok = true;
  double worst = 0;
  for (uint64_t seed : {61u, 62u, 63u}) {
    Rng rng(seed);
    auto P = init_hat<double>(cfg, v, rng);
    double err = grad_check(
        all_params(P),
        [&](Tape<double>& tp) { return tp.scale(hat_loss(tp, P, cfg, v, toks), 1.0 / norm); },
        1e-5, 3, 17 + seed);
    worst = std::max(worst, err);
    ok = ok && err < 1e-4;
  }
  std::ostringstream d;
  d << "3 seeds, max relative error " << worst << " (bound 1e-4), " << fmt_secs(timer);
  report(7, "gradient check vs central differences", ok, d.str());
}

// --- 8. trainability -------------------------------------------------------------------

void check_8_trainability() {
  Timer timer;
  Vocabulary v;
  HATConfig cfg;  // dim-64 full model

  // Two songs that differ only in pitch content. Any shared-prefix pair has
  // an irreducible split at its first divergence; putting it in the
  // lowest-weighted category and keeping the songs long leaves the floor
  // (2·ln2/positions ≈ 0.028) safely under the 0.05 target.
  Song a = grid_song(v, 4, 2, 3);
  Song b = a;
  for (Note& n : b.notes) n.pitch += 1;
  std::vector<TokenSeq> corpus = {prepare_for_training(tokenize(a, v), cfg),
                                  prepare_for_training(tokenize(b, v), cfg)};

  Rng rng(cfg.seed);
  auto P = init_hat<double>(cfg, v, rng);
  AdamState<double> opt;
  TrainOptions opts;
  opts.max_steps = 5000;
  opts.batch_size = 2;
  opts.lr = 1e-3;  // memorization schedule; the paper rate is for full scale
  opts.loss_threshold = 0.05;
  opts.seed = cfg.seed;
  std::vector<StepRecord> records = train_loop(P, cfg, v, corpus, opt, opts);

  double best500 = std::numeric_limits<double>::infinity();
  for (const StepRecord& r : records)
    if (r.step <= 500) best500 = std::min(best500, r.loss);
  const StepRecord& last = records.back();

  const bool ok = best500 < 0.5 && last.loss < 0.05 && last.step <= 5000 &&
                  timer.secs() < 1800.0;
  std::ostringstream d;
  d << "loss " << best500 << " by step 500 (want <0.5), " << last.loss << " at step "
    << last.step << " (want <0.05 within 5000), " << fmt_secs(timer);
  report(8, "trainability on the micro-corpus", ok, d.str());
}

// --- 9. ablation identity ----------------------------------------------------------------

void check_9_ablation() {
  Vocabulary v;
  HATConfig cfg = tiny_config();
  TokenSeq toks = tokenize(grid_song(v, 3, 2), v);  // 3 phrases x 2 chords
  HseGroups groups = hse_groups(toks);
  Rng rng(9);
  auto P = init_hat<double>(cfg, v, rng);

  Tensor<double> S0(static_cast<int>(toks.size()), cfg.dim);
  for (double& x : S0.data) x = rng.normal();

  bool ok = true;
  auto run = [&](Variant var, HseTrace& tr) {
    cfg.variant = var;
    Tape<double> tp;
    auto S = tp.input(S0);
    auto out = hse_forward(tp, P, cfg, S, groups, &tr);
    return std::make_pair(out == S, tp.value(out).data == S0.data);
  };

  HseTrace tr;
  auto [same_id, same_rows] = run(Variant::Base, tr);
  ok = ok && same_id && same_rows;  // base: output IS the input
  ok = ok && tr.texture_passes == 0 && tr.form_passes == 0 &&
       tr.phrase_rows_updated == 0 && tr.chord_rows_updated == 0;

  run(Variant::WithForm, tr);  // form path only: phrase rows move, chords don't
  ok = ok && tr.texture_passes == 0 && tr.form_passes == 1 &&
       tr.phrase_rows_updated == 2 && tr.chord_rows_updated == 0;

  run(Variant::WithTexture, tr);  // one global texture pass, no phrase updates
  ok = ok && tr.texture_passes == 1 && tr.form_passes == 0 &&
       tr.phrase_rows_updated == 0 && tr.chord_rows_updated == 6;

  run(Variant::Full, tr);  // per-phrase textures + form
  ok = ok && tr.texture_passes == 3 && tr.form_passes == 1 &&
       tr.phrase_rows_updated == 2 && tr.chord_rows_updated == 6;

  report(9, "ablation identity and path activation", ok,
         "base passthrough exact; form/texture/full counters as declared");
}

// --- 10. sampling statistics -----------------------------------------------------------------

void check_10_sampling() {
  bool ok = true;

  const std::vector<double> probs = {0.5, 0.3, 0.2};
  SamplingParams plain{1.0, 1.0};
  const int draws = 100000;
  std::array<long, 3> counts{};
  Rng rng(1010);
  for (int i = 0; i < draws; ++i) counts[nucleus_sample(probs, plain, rng)] += 1;
  double worst_sigma = 0;
  for (int k = 0; k < 3; ++k) {
    const double mean = draws * probs[k];
    const double sigma = std::sqrt(draws * probs[k] * (1.0 - probs[k]));
    worst_sigma = std::max(worst_sigma, std::fabs(counts[k] - mean) / sigma);
  }
  ok = ok && worst_sigma <= 3.0;

  SamplingParams cold{1e-6, 1.0};
  for (int trial = 0; trial < 50 && ok; ++trial) {
    std::vector<double> d(4);
    double z = 0;
    for (double& x : d) z += (x = rng.uniform() + 1e-3);
    for (double& x : d) x /= z;
    const int argmax =
        static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
    ok = ok && nucleus_sample(d, cold, rng) == argmax;
  }

  HATConfig cfg;
  ok = ok && cfg.sampling[4] == SamplingParams{1.0, 0.99};  // Phrase defaults

  std::ostringstream d;
  d << "1e5 draws, worst deviation " << worst_sigma << " sigma; cold draws take the "
    << "argmax; phrase defaults (1.0, 0.99)";
  report(10, "sampling statistics", ok, d.str());
}

// --- 11. evaluation harness ------------------------------------------------------------------

void check_11_eval_harness() {
  Vocabulary v;
  Rng rng(1111);
  bool ok = true;

  // (a) perfect oracle: injected one-hot distributions score 1.0 / 0.0
  std::vector<TokenSeq> oracle_corpus = {tokenize(grid_song(v, 2, 2), v),
                                         tokenize(random_song(rng, v), v)};
  for (size_t si = 0; si < oracle_corpus.size() && ok; ++si) {
    const TokenSeq& toks = oracle_corpus[si];
    for (size_t i = 1; i < toks.size() && ok; ++i) {
      std::array<int, kNumCategories> enc = v.encode(toks[i]);
      StepDistsD dists;
      for (int c = 0; c < kNumCategories; ++c) {
        dists[c].assign(static_cast<size_t>(v.size(static_cast<Category>(c))), 0.0);
        dists[c][static_cast<size_t>(enc[c])] = 1.0;
      }
      EvalRecord rec =
          score_position(dists, enc, toks[i].type, static_cast<int>(si),
                         static_cast<int>(i), 0.5);
      ok = rec.accurate() && rec.mse() == 0.0;
    }
  }

  // (b) near-chance: iid noisy-uniform distributions over >= 1e4 positions.
  // Independence across positions is what makes the binomial interval valid.
  std::vector<EvalRecord> records;
  while (records.size() < 10500) {
    TokenSeq toks = tokenize(random_song(rng, v), v);
    std::array<int, kNumTokenTypes> totals{}, seen{};
    for (size_t i = 1; i < toks.size(); ++i) totals[static_cast<int>(toks[i].type)] += 1;
    for (size_t i = 1; i < toks.size(); ++i) {
      StepDistsD dists;
      for (int c = 0; c < kNumCategories; ++c) {
        const int K = v.size(static_cast<Category>(c));
        std::vector<double> logits(static_cast<size_t>(K));
        double mx = -1e30;
        for (double& l : logits) mx = std::max(mx, l = 0.01 * rng.normal());
        double z = 0;
        for (double l : logits) z += std::exp(l - mx);
        dists[c].resize(logits.size());
        for (size_t k = 0; k < logits.size(); ++k)
          dists[c][k] = std::exp(logits[k] - mx) / z;
      }
      const int t = static_cast<int>(toks[i].type);
      records.push_back(score_position(dists, v.encode(toks[i]), toks[i].type, 0,
                                       static_cast<int>(i),
                                       static_cast<double>(seen[t]) / totals[t]));
      seen[t] += 1;
    }
  }
  const double acc = type_row(records).accuracy;
  const double chance = 1.0 / kNumTokenTypes;
  const double bound =
      2.576 * std::sqrt(chance * (1.0 - chance) / static_cast<double>(records.size()));
  ok = ok && std::fabs(acc - chance) <= bound;

  // (c) trend table: 10 bins per curve, empty bins visibly null rather than
  // zero. Records capped at progress < 0.5 force the upper half empty.
  std::vector<EvalRecord> early;
  for (const EvalRecord& r : records)
    if (r.progress < 0.5) early.push_back(r);
  std::ostringstream table;
  table << "type,bin,count,mean_mse\n";
  int data_rows = 0, null_rows = 0;
  for (const TrendCurve& curve : mse_trend(early, 10)) {
    if (curve.bins.size() != 10) ok = false;
    for (size_t b = 0; b < curve.bins.size(); ++b) {
      const TrendBin& bin = curve.bins[b];
      if ((bin.count == 0) != !bin.mean_mse.has_value()) ok = false;
      if (b >= 5 && (bin.count != 0 || bin.mean_mse.has_value())) ok = false;
      table << cli::token_type_name(curve.type) << "," << b << "," << bin.count << ","
            << (bin.mean_mse.has_value() ? std::to_string(*bin.mean_mse) : std::string())
            << "\n";
      data_rows += 1;
      null_rows += bin.mean_mse.has_value() ? 0 : 1;
    }
  }
  ok = ok && data_rows == 30 && null_rows >= 15;
  // the emitted table really renders nulls as empty cells
  ok = ok && table.str().find(",0,\n") != std::string::npos;

  std::ostringstream d;
  d << "oracle 1.0/0.0; type accuracy " << acc << " vs chance " << chance << " ±"
    << bound << " on " << records.size() << " positions; trend rows " << data_rows
    << " with " << null_rows << " explicit nulls";
  report(11, "evaluation harness", ok, d.str());
}

}  // namespace

int main() {
  Timer total;
  check_1_metric_oracles();
  check_2_hand_values();
  check_3_paper_numbers();
  check_4_roundtrip();
  check_5_causality();
  check_6_incremental();
  check_7_gradcheck();
  check_8_trainability();
  check_9_ablation();
  check_10_sampling();
  check_11_eval_harness();
  std::printf("%s, total %s\n", g_failed == 0 ? "acceptance: all checks passed"
                                              : "acceptance: FAILURES PRESENT",
              fmt_secs(total).c_str());
  return g_failed == 0 ? 0 : 1;
}
