#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hat/eval.hpp"
#include "test_util.hpp"

using namespace hat;

namespace {

using testutil::grid_song;
using testutil::random_song;

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

// One-hot distributions matching the encoded target: the perfect oracle.
StepDistsD oracle_dists(const Vocabulary& v, const Token& t) {
  StepDistsD d;
  auto idx = v.encode(t);
  for (int c = 0; c < kNumCategories; ++c) {
    d[c].assign(v.size(static_cast<Category>(c)), 0.0);
    d[c][idx[c]] = 1.0;
  }
  return d;
}

// Near-uniform distributions with iid noise: argmaxes land uniformly at
// random, independently per call, which is what a chance baseline needs.
StepDistsD noisy_uniform_dists(const Vocabulary& v, Rng& rng) {
  StepDistsD d;
  for (int c = 0; c < kNumCategories; ++c) {
    int k = v.size(static_cast<Category>(c));
    std::vector<double> logits(k);
    for (double& x : logits) x = 0.01 * rng.normal();
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    d[c].resize(k);
    for (int i = 0; i < k; ++i) sum += d[c][i] = std::exp(logits[i] - mx);
    for (int i = 0; i < k; ++i) d[c][i] /= sum;
  }
  return d;
}

std::vector<int> sorted_all(const DatasetSplit& s) {
  std::vector<int> all;
  all.insert(all.end(), s.train.begin(), s.train.end());
  all.insert(all.end(), s.valid.begin(), s.valid.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

TEST_CASE("dataset split uses the 773:41:43 proportions") {
  DatasetSplit s = split_dataset(857, 5);
  CHECK(s.train.size() == 773);
  CHECK(s.valid.size() == 41);
  CHECK(s.test.size() == 43);
  auto all = sorted_all(s);
  std::set<int> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 857);
  CHECK(*uniq.begin() == 0);
  CHECK(*uniq.rbegin() == 856);

  DatasetSplit hundred = split_dataset(100, 11);
  CHECK(hundred.train.size() == 90);
  CHECK(hundred.valid.size() == 5);
  CHECK(hundred.test.size() == 5);

  // Degenerate but legal: proportional rounding gives everything to train.
  DatasetSplit three = split_dataset(3, 1);
  CHECK(three.train.size() == 3);
  CHECK_THROWS_AS(split_dataset(2, 1), ValidationError);
}

TEST_CASE("dataset split is seed-deterministic and shuffles") {
  DatasetSplit a = split_dataset(50, 9), b = split_dataset(50, 9), c = split_dataset(50, 10);
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);

  std::vector<int> identity(a.train.size());
  for (size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
  CHECK(a.train != identity);  // virtually impossible for a real shuffle
}

TEST_CASE("a perfect oracle scores full accuracy and zero error") {
  Vocabulary v;
  TokenSeq toks = tokenize(grid_song(v, 2, 2), v);
  std::vector<EvalRecord> records;
  for (size_t i = 1; i < toks.size(); ++i) {
    records.push_back(score_position(oracle_dists(v, toks[i]), v.encode(toks[i]), toks[i].type,
                                     0, static_cast<int>(i), 0.0));
    const EvalRecord& r = records.back();
    CHECK(r.accurate());
    CHECK(r.mse() == 0.0);
    for (int c = 0; c < kNumCategories; ++c) CHECK(r.correct[c]);
  }
  CHECK(type_row(records).accuracy == 1.0);
  for (TokenType t : {TokenType::Note, TokenType::Chord, TokenType::Phrase}) {
    EvalRow row = composite_row(records, t);
    CHECK(row.accuracy == 1.0);
    CHECK(row.mse == 0.0);
  }
}

TEST_CASE("composite accuracy ignores fields the token does not carry") {
  Vocabulary v;
  Token note;
  note.type = TokenType::Note;
  note.bar = 2;
  note.beat = 5;
  note.track = 0;
  note.pitch = 60;
  note.duration = 4;

  StepDistsD d = oracle_dists(v, note);
  // Wrong argmax on tempo (a field notes do not carry): still accurate.
  d[3].assign(v.size(Category::Tempo), 0.0);
  d[3][7] = 1.0;
  EvalRecord r = score_position(d, v.encode(note), note.type, 0, 1, 0.0);
  CHECK_FALSE(r.applicable[3]);
  CHECK_FALSE(r.correct[3]);
  CHECK(r.accurate());

  // Wrong argmax on pitch: not accurate any more.
  d = oracle_dists(v, note);
  std::swap(d[7][0], d[7][v.encode(note)[7]]);
  r = score_position(d, v.encode(note), note.type, 0, 1, 0.0);
  CHECK(r.applicable[7]);
  CHECK_FALSE(r.correct[7]);
  CHECK_FALSE(r.accurate());
}

TEST_CASE("squared error follows the probability-vs-one-hot definition") {
  Vocabulary v;
  Token t = Token::eos();
  StepDistsD d = oracle_dists(v, t);
  d[0] = {0.5, 0.25, 0.25, 0.0, 0.0};  // target index 1 (EOS)
  EvalRecord r = score_position(d, v.encode(t), t.type, 0, 1, 0.0);
  // ((0.5)^2 + (0.75)^2 + (0.25)^2) / 5 = 0.875/5
  CHECK(r.sq_err[0] == Catch::Approx(0.875 / 5).margin(1e-15));
  for (int c = 1; c < kNumCategories; ++c) CHECK(r.sq_err[c] == 0.0);
  CHECK(r.mse() == Catch::Approx(0.875 / 5 / 9).margin(1e-15));
  CHECK_FALSE(r.correct[0]);

  StepDistsD bad = d;
  bad[2].clear();
  CHECK_THROWS_AS(score_position(bad, v.encode(t), t.type, 0, 1, 0.0), ValidationError);
}

TEST_CASE("model evaluation is deterministic and covers every position") {
  Vocabulary v;
  HATConfig cfg = tiny_config();
  Rng rng(51);
  auto P = init_hat<double>(cfg, v, rng);

  std::vector<TokenSeq> seqs = {tokenize(grid_song(v, 2, 2), v),
                                tokenize(grid_song(v, 3, 2), v)};
  size_t want = 0;
  for (const auto& s : seqs) want += s.size() - 1;

  auto recs = next_token_eval(P, cfg, v, seqs);
  REQUIRE(recs.size() == want);
  auto again = next_token_eval(P, cfg, v, seqs);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].correct == again[i].correct);
    CHECK(recs[i].sq_err == again[i].sq_err);
    CHECK(recs[i].progress == again[i].progress);
  }

  Vocabulary other(VocabConfig{64, 30.0, 210.0, 32});
  CHECK_THROWS_AS(next_token_eval(P, cfg, other, seqs), ValidationError);
}

TEST_CASE("progress tracks how much of each token type came before") {
  Vocabulary v;
  HATConfig cfg = tiny_config();
  Rng rng(53);
  auto P = init_hat<double>(cfg, v, rng);
  std::vector<TokenSeq> seqs = {tokenize(grid_song(v, 2, 2), v)};
  auto recs = next_token_eval(P, cfg, v, seqs);

  std::vector<double> note_prog, chord_prog, phrase_prog;
  for (const auto& r : recs) {
    if (r.type == TokenType::Note) note_prog.push_back(r.progress);
    if (r.type == TokenType::Chord) chord_prog.push_back(r.progress);
    if (r.type == TokenType::Phrase) phrase_prog.push_back(r.progress);
  }
  CHECK(note_prog == std::vector<double>{0.0, 0.25, 0.5, 0.75});
  CHECK(chord_prog == std::vector<double>{0.0, 0.25, 0.5, 0.75});
  CHECK(phrase_prog == std::vector<double>{0.0, 0.5});
}

TEST_CASE("a noisy-uniform baseline lands at chance type accuracy") {
  Vocabulary v;
  Rng data_rng(71);
  std::vector<TokenSeq> seqs;
  long positions = 0;
  while (positions < 10500) {
    TokenSeq t = tokenize(random_song(data_rng, v), v);
    positions += static_cast<long>(t.size()) - 1;
    seqs.push_back(std::move(t));
  }

  Rng noise(2);
  std::vector<EvalRecord> records;
  for (size_t si = 0; si < seqs.size(); ++si)
    for (size_t i = 1; i < seqs[si].size(); ++i)
      records.push_back(score_position(noisy_uniform_dists(v, noise), v.encode(seqs[si][i]),
                                       seqs[si][i].type, static_cast<int>(si),
                                       static_cast<int>(i), 0.0));

  EvalRow row = type_row(records);
  REQUIRE(row.count >= 10000);
  double bound = 2.576 * std::sqrt(0.2 * 0.8 / row.count);
  CHECK(std::abs(row.accuracy - 0.2) <= bound);

  // Near-uniform probabilities pin the type-category MSE at its closed form.
  double k = kNumTokenTypes;
  CHECK(row.mse == Catch::Approx((k - 1.0) / (k * k)).margin(1e-3));
}

TEST_CASE("trend bins average the records that fall inside them") {
  auto rec_at = [](TokenType t, double progress, double mse_value) {
    EvalRecord r;
    r.type = t;
    r.progress = progress;
    r.sq_err.fill(mse_value);  // mse() averages to mse_value
    return r;
  };

  SECTION("constant error gives a flat curve") {
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 40; ++i) recs.push_back(rec_at(TokenType::Note, i / 40.0, 0.125));
    auto curves = mse_trend(recs, 10);
    REQUIRE(curves.size() == 3);
    for (const auto& c : curves) REQUIRE(c.bins.size() == 10);
    for (const TrendBin& b : curves[0].bins) {
      REQUIRE(b.mean_mse.has_value());
      CHECK(*b.mean_mse == 0.125);
    }
    // No chord or phrase records: those curves are all nulls.
    for (const TrendBin& b : curves[1].bins) CHECK_FALSE(b.mean_mse.has_value());
  }

  SECTION("error equal to progress tracks the bin centers") {
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 100; ++i) recs.push_back(rec_at(TokenType::Chord, i / 100.0, i / 100.0));
    auto curves = mse_trend(recs, 10);
    for (int b = 0; b < 10; ++b) {
      REQUIRE(curves[1].bins[b].count == 10);
      double center = b / 10.0 + 0.05;
      CHECK(std::abs(*curves[1].bins[b].mean_mse - center) <= 0.05);
    }
  }

  SECTION("bins nobody reaches stay explicitly empty") {
    std::vector<EvalRecord> recs;
    for (int i = 0; i < 10; ++i) recs.push_back(rec_at(TokenType::Phrase, i / 20.0, 0.5));
    auto curves = mse_trend(recs, 10);
    for (int b = 0; b < 5; ++b) CHECK(curves[2].bins[b].mean_mse.has_value());
    for (int b = 5; b < 10; ++b) {
      CHECK(curves[2].bins[b].count == 0);
      CHECK_FALSE(curves[2].bins[b].mean_mse.has_value());
    }
  }

  SECTION("degenerate bin counts") {
    std::vector<EvalRecord> one = {rec_at(TokenType::Note, 0.99, 0.25)};
    auto curves = mse_trend(one, 1);
    REQUIRE(curves[0].bins.size() == 1);
    CHECK(*curves[0].bins[0].mean_mse == 0.25);
    CHECK_THROWS_AS(mse_trend(one, 0), ValidationError);
  }
}
