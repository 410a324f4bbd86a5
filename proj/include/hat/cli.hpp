// Operator surface: the tokenize / train / generate / eval subcommands that
// tie the pipeline together. Argument parsing lives in the tool binary; this
// header owns the run configuration, the command bodies, and the mapping from
// exception class to process exit code, so tests can drive commands without
// spawning processes.
//
// Exit codes: 0 success, 1 usage or config problems, 2 input parse failures,
// 3 semantic validation failures, 4 anything else.
#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hat/eval.hpp"
#include "hat/generate.hpp"
#include "hat/metrics.hpp"
#include "hat/train.hpp"

namespace hat::cli {

namespace fs = std::filesystem;

// Bad invocations: unknown flags/commands, incoherent flag combinations,
// broken config files. Everything the operator must fix before any input
// data is even looked at.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  kExitValidation = 3,
  kExitRuntime = 4,
};

inline const char* token_type_name(TokenType t) {
  static const char* names[kNumTokenTypes] = {"bos", "eos", "phrase", "chord", "note"};
  return names[static_cast<int>(t)];
}

// --- Run configuration -------------------------------------------------------

// Everything a subcommand needs, filled from flags by the tool binary. Model
// architecture still comes from the key=value config file (see
// config_from_text), which rejects unknown keys; these are the run-level
// knobs layered on top.
struct RunConfig {
  std::string command;           // tokenize | train | generate | eval
  std::string in_dir;            // songs (tokenize), token files (train/eval)
  std::string out_dir;           // every command writes its artifacts here
  std::string config_path;       // optional model config file
  std::string checkpoint;        // resume source (train), model (generate/eval)
  std::string prompt_path;       // generate: token file used as the prefix
  std::string reference_dir;     // eval: corpus behind the n-gram model
  std::optional<uint64_t> seed;  // train: init/batch seed; generate: sampling seed
  std::string variant;           // empty keeps the config; else base|form|texture|full

  int pieces = 10;            // generate: how many songs to sample
  int64_t max_steps = 500;    // train: global optimizer-step target
  int batch_size = 8;         // train
  double lr = 1e-4;           // train
  double loss_threshold = 0.05;  // train: early stop; <= 0 disables
  int checkpoint_every = 100;    // train: periodic snapshot interval

  std::vector<int> ngram_ns = {2, 3, 4};  // eval: chord progression orders
  double lambda = 0.5;                    // eval: CPI/CPVR blend weight
  std::string track_filter = "all";       // eval: all | accompaniment
  std::string report = "csv";             // only table format we emit
  bool with_cpr = true;                   // eval: progression metrics need a reference
  int workers = 1;                        // eval: sequence-level parallelism

  void validate() const {
    if (command != "tokenize" && command != "train" && command != "generate" &&
        command != "eval")
      throw UsageError("cli: unknown command: " + command);
    if (out_dir.empty()) throw UsageError("cli: --out is required");
    if (command == "generate") {
      if (checkpoint.empty()) throw UsageError("cli: generate needs --checkpoint");
      if (pieces < 0) throw UsageError("cli: --pieces must be >= 0");
    } else if (in_dir.empty()) {
      throw UsageError("cli: --in is required");
    }
    if (command == "train") {
      if (max_steps < 1) throw UsageError("cli: --steps must be >= 1");
      if (batch_size < 1) throw UsageError("cli: --batch must be >= 1");
      if (!(lr > 0.0)) throw UsageError("cli: --lr must be positive");
      if (checkpoint_every < 1) throw UsageError("cli: --checkpoint-every must be >= 1");
      if (!checkpoint.empty() &&
          (!config_path.empty() || !variant.empty() || seed.has_value()))
        throw UsageError(
            "cli: --checkpoint resume takes its config, variant and seed from "
            "the checkpoint; drop --config/--variant/--seed");
    }
    if (command == "eval") {
      if (with_cpr && reference_dir.empty())
        throw UsageError("cli: progression metrics need --reference (or pass --no-cpr)");
      if (ngram_ns.empty()) throw UsageError("cli: --ns needs at least one order");
      for (int n : ngram_ns)
        if (n < 1) throw UsageError("cli: --ns entries must be >= 1");
      if (lambda < 0.0 || lambda > 1.0)
        throw UsageError("cli: --lambda must lie in [0, 1]");
      if (track_filter != "all" && track_filter != "accompaniment")
        throw UsageError("cli: --tracks must be all or accompaniment");
    }
    if (report != "csv") throw UsageError("cli: --report only supports csv");
    if (workers < 1) throw UsageError("cli: worker count must be >= 1");
    if (!variant.empty()) {
      try {
        variant_from_name(variant);
      } catch (const ValidationError& e) {
        throw UsageError(std::string("cli: ") + e.what());
      }
    }
  }
};

// HAT_WORKERS caps how many threads eval may fan sequences across. Unset
// means sequential.
inline int workers_from_env() {
  const char* raw = std::getenv("HAT_WORKERS");
  if (raw == nullptr || *raw == '\0') return 1;
  int n = 0;
  try {
    n = detail::parse_int(raw, "HAT_WORKERS");
  } catch (const ParseError&) {
    throw UsageError("cli: HAT_WORKERS must be a positive integer");
  }
  if (n < 1) throw UsageError("cli: HAT_WORKERS must be a positive integer");
  return n;
}

// --- Small file helpers ------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Sorted so runs are reproducible regardless of directory iteration order.
inline std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw ValidationError("cli: not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext)
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

// The model config file is an operator input, so parse failures there are
// usage problems, not data problems.
inline HATConfig load_model_config(const RunConfig& rc) {
  HATConfig cfg;
  if (!rc.config_path.empty()) {
    try {
      cfg = config_from_text(read_text_file(rc.config_path));
    } catch (const ParseError& e) {
      throw UsageError(std::string("cli: ") + e.what());
    }
  }
  if (!rc.variant.empty()) cfg.variant = variant_from_name(rc.variant);
  if (rc.seed.has_value()) cfg.seed = *rc.seed;
  cfg.validate();
  return cfg;
}

// Every command echoes how it was invoked next to its outputs so a run can
// be reproduced from the artifact directory alone.
inline void write_metadata(const RunConfig& rc, const HATConfig* cfg,
                           const std::vector<std::string>& lines) {
  std::string text = "command=" + rc.command + "\n";
  if (!rc.in_dir.empty()) text += "in=" + rc.in_dir + "\n";
  text += "out=" + rc.out_dir + "\n";
  if (!rc.config_path.empty()) text += "config_file=" + rc.config_path + "\n";
  if (!rc.checkpoint.empty()) text += "checkpoint=" + rc.checkpoint + "\n";
  if (!rc.prompt_path.empty()) text += "prompt=" + rc.prompt_path + "\n";
  if (!rc.reference_dir.empty()) text += "reference=" + rc.reference_dir + "\n";
  if (rc.seed.has_value()) text += "seed=" + std::to_string(*rc.seed) + "\n";
  for (const std::string& l : lines) text += l + "\n";
  if (cfg != nullptr) text += "[model_config]\n" + config_to_text(*cfg);
  write_text_file((fs::path(rc.out_dir) / "run_metadata.txt").string(), text);
}

inline std::string csv_cell(std::optional<double> v) {
  return v.has_value() ? detail::fmt_double(*v) : std::string();
}

// --- tokenize ----------------------------------------------------------------

// Turns a directory of interchange songs into one token file per song plus
// the vocabulary summary and per-type counts. A bad song doesn't stop the
// batch: errors are collected, healthy files still come out, and the caller
// signals the failures through the exit code. Returns the failure count.
inline int cmd_tokenize(const RunConfig& rc) {
  rc.validate();
  Vocabulary vocab;
  std::vector<fs::path> files = list_files(rc.in_dir, ".song");
  if (files.empty()) throw ValidationError("tokenize: no .song files in " + rc.in_dir);
  fs::create_directories(rc.out_dir);

  std::array<long, kNumTokenTypes> counts{};
  std::vector<std::string> log;
  int failed = 0;
  for (const fs::path& f : files) {
    try {
      Song song = load_song(f.string());
      TokenSeq toks = tokenize(song, vocab);
      write_tokens(toks, vocab,
                   (fs::path(rc.out_dir) / f.stem().concat(".tokens")).string());
      for (const Token& t : toks) counts[static_cast<int>(t.type)] += 1;
      log.push_back("ok=" + f.stem().string());
    } catch (const std::exception& e) {
      failed += 1;
      log.push_back("error=" + f.filename().string() + ": " + e.what());
      std::cerr << "tokenize: " << f.filename().string() << ": " << e.what() << "\n";
    }
  }

  write_text_file((fs::path(rc.out_dir) / "vocabulary.txt").string(), vocab_summary(vocab));
  std::string csv = "type,count\n";
  for (int t = 0; t < kNumTokenTypes; ++t)
    csv += std::string(token_type_name(static_cast<TokenType>(t))) + "," +
           std::to_string(counts[t]) + "\n";
  write_text_file((fs::path(rc.out_dir) / "tokenize_summary.csv").string(), csv);

  std::vector<std::string> lines = {"files=" + std::to_string(files.size()),
                                    "failed=" + std::to_string(failed)};
  lines.insert(lines.end(), log.begin(), log.end());
  write_metadata(rc, nullptr, lines);
  return failed;
}

// --- train -------------------------------------------------------------------

// The tokenize step leaves vocabulary.txt beside the token files; later
// stages refuse to run if it disagrees with the vocabulary this build
// produces.
inline void check_vocabulary_file(const std::string& dir, const Vocabulary& vocab) {
  fs::path p = fs::path(dir) / "vocabulary.txt";
  if (!fs::exists(p)) throw ValidationError("cli: missing " + p.string());
  std::istringstream in(read_text_file(p.string()));
  std::string line;
  std::getline(in, line);
  const std::string want = "vocab_hash=" + to_hex(vocab.hash());
  if (line != want)
    throw ValidationError("cli: vocabulary mismatch in " + p.string() + " (" + line +
                          ", expected " + want + ")");
}

// Fits a model to the token files in --in. Fresh runs take architecture from
// --config/--variant/--seed; resume runs (--checkpoint) restore parameters,
// optimizer moments and config, then continue toward --steps, reproducing
// the trajectory an uninterrupted run would have had. Writes model.bin,
// periodic ckpt_<step>.bin snapshots, and loss_log.csv.
inline int cmd_train(const RunConfig& rc) {
  rc.validate();
  Vocabulary vocab;
  check_vocabulary_file(rc.in_dir, vocab);
  std::vector<fs::path> files = list_files(rc.in_dir, ".tokens");
  if (files.empty()) throw ValidationError("train: no .tokens files in " + rc.in_dir);

  HATConfig cfg;
  HATParameters<double> P;
  AdamState<double> opt;
  if (!rc.checkpoint.empty()) {
    Checkpoint<double> ck = load_checkpoint<double>(rc.checkpoint, vocab);
    if (!ck.has_optimizer)
      throw ValidationError("train: checkpoint has no optimizer state, cannot resume");
    cfg = ck.cfg;
    P = std::move(ck.params);
    opt = std::move(ck.opt);
  } else {
    cfg = load_model_config(rc);
    Rng rng(cfg.seed);
    P = init_hat<double>(cfg, vocab, rng);
  }

  std::vector<TokenSeq> corpus;
  for (const fs::path& f : files)
    corpus.push_back(prepare_for_training(read_tokens(f.string(), vocab), cfg));

  fs::create_directories(rc.out_dir);
  TrainOptions opts;
  opts.max_steps = rc.max_steps;
  opts.batch_size = rc.batch_size;
  opts.lr = rc.lr;
  opts.loss_threshold = rc.loss_threshold;
  opts.seed = cfg.seed;

  std::string loss_csv = "step,loss\n";
  std::vector<StepRecord> records =
      train_loop(P, cfg, vocab, corpus, opt, opts, [&](const StepRecord& r) {
        loss_csv += std::to_string(r.step) + "," + detail::fmt_double(r.loss) + "\n";
        if (r.step % rc.checkpoint_every == 0)
          save_checkpoint(
              (fs::path(rc.out_dir) / ("ckpt_" + std::to_string(r.step) + ".bin")).string(),
              P, cfg, vocab, &opt);
      });

  save_checkpoint((fs::path(rc.out_dir) / "model.bin").string(), P, cfg, vocab, &opt);
  write_text_file((fs::path(rc.out_dir) / "loss_log.csv").string(), loss_csv);

  std::vector<std::string> lines = {"songs=" + std::to_string(corpus.size()),
                                    "steps_run=" + std::to_string(records.size())};
  if (!records.empty()) {
    const StepRecord& last = records.back();
    bool early = rc.loss_threshold > 0.0 && last.loss < rc.loss_threshold;
    lines.push_back("final_step=" + std::to_string(last.step));
    lines.push_back("final_loss=" + detail::fmt_double(last.loss));
    lines.push_back(std::string("stop=") + (early ? "threshold" : "max_steps"));
  }
  write_metadata(rc, &cfg, lines);
  return kExitOk;
}

// --- generate ----------------------------------------------------------------

// Samples --pieces songs from a checkpoint, each with its own recorded seed
// derived from --seed, so any single piece can be regenerated in isolation.
// An optional --prompt token file becomes the verbatim prefix of every
// piece. Emits piece_###.tokens plus the lenient-decoded piece_###.song.
inline int cmd_generate(const RunConfig& rc) {
  rc.validate();
  Vocabulary vocab;
  Checkpoint<double> ck = load_checkpoint<double>(rc.checkpoint, vocab);
  HATConfig cfg = ck.cfg;
  if (!rc.variant.empty()) cfg.variant = variant_from_name(rc.variant);

  TokenSeq prompt;
  if (!rc.prompt_path.empty())
    prompt = read_tokens(rc.prompt_path, vocab);
  else
    prompt.push_back(Token{});  // bare BOS
  const uint64_t base_seed = rc.seed.value_or(1);

  fs::create_directories(rc.out_dir);
  std::vector<std::string> lines = {"pieces=" + std::to_string(rc.pieces),
                                    "prompt_tokens=" + std::to_string(prompt.size())};
  for (int i = 0; i < rc.pieces; ++i) {
    const uint64_t piece_seed = mix_seed(base_seed, static_cast<uint64_t>(i));
    Rng rng(piece_seed);
    GenerateResult res = generate(ck.params, cfg, vocab, prompt, rng);

    std::ostringstream stem;
    stem << "piece_" << std::setw(3) << std::setfill('0') << i;
    write_tokens(res.tokens, vocab,
                 (fs::path(rc.out_dir) / (stem.str() + ".tokens")).string());
    std::vector<std::string> warnings;
    Song song = detokenize_lenient(res.tokens, vocab, &warnings, stem.str());
    save_song(song, (fs::path(rc.out_dir) / (stem.str() + ".song")).string());

    lines.push_back(stem.str() + ": seed=" + std::to_string(piece_seed) +
                    " tokens=" + std::to_string(res.tokens.size()) +
                    " stop=" + res.stop_reason);
    for (const std::string& w : warnings) lines.push_back("warning=" + stem.str() + ": " + w);
  }
  write_metadata(rc, &cfg, lines);
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

// Chord sequences for the n-gram side of the report.
inline std::vector<ChordIds> chord_corpus(const std::vector<fs::path>& files,
                                          const Vocabulary& vocab) {
  std::vector<ChordIds> out;
  for (const fs::path& f : files) {
    TokenSeq toks = read_tokens(f.string(), vocab);
    out.push_back(chord_ids(detokenize_lenient(toks, vocab, nullptr)));
  }
  return out;
}

// next_token_eval over [begin, end) with globally consistent sequence ids.
// Fanning whole sequences across workers keeps every record bit-identical
// to the sequential run; chunks are concatenated back in order.
template <typename T>
std::vector<EvalRecord> eval_records(HATParameters<T>& P, const HATConfig& cfg,
                                     const Vocabulary& vocab,
                                     const std::vector<TokenSeq>& seqs, int workers) {
  if (workers <= 1 || seqs.size() < 2) return next_token_eval(P, cfg, vocab, seqs);
  const int n = static_cast<int>(seqs.size());
  const int w = std::min(workers, n);
  std::vector<std::vector<EvalRecord>> parts(w);
  std::vector<std::thread> pool;
  for (int k = 0; k < w; ++k) {
    pool.emplace_back([&, k]() {
      // contiguous slice [lo, hi) for worker k
      const int lo = static_cast<int>(static_cast<int64_t>(n) * k / w);
      const int hi = static_cast<int>(static_cast<int64_t>(n) * (k + 1) / w);
      std::vector<TokenSeq> slice(seqs.begin() + lo, seqs.begin() + hi);
      parts[k] = next_token_eval(P, cfg, vocab, slice);
      for (EvalRecord& r : parts[k]) r.sequence += lo;
    });
  }
  for (std::thread& t : pool) t.join();
  std::vector<EvalRecord> records;
  for (std::vector<EvalRecord>& p : parts)
    records.insert(records.end(), p.begin(), p.end());
  return records;
}

// Scores a directory of pieces: AGS per piece, CPI/CPVR/CPR at each --ns
// order against the --reference corpus, and (when --checkpoint is given)
// next-token accuracy/MSE plus the progress-binned MSE trend. Aggregate row
// averages whatever cells are present; pieces too short for an order are
// skipped for that order with a warning.
inline int cmd_eval(const RunConfig& rc) {
  rc.validate();
  Vocabulary vocab;
  std::vector<fs::path> files = list_files(rc.in_dir, ".tokens");
  if (files.empty()) throw ValidationError("eval: no .tokens files in " + rc.in_dir);
  fs::create_directories(rc.out_dir);

  GrooveFilter filter;
  if (rc.track_filter == "accompaniment") filter = GrooveFilter::accompaniment();

  std::vector<std::string> names;
  std::vector<TokenSeq> seqs;
  std::vector<Song> songs;
  std::vector<ChordIds> piece_chords;
  for (const fs::path& f : files) {
    names.push_back(f.stem().string());
    seqs.push_back(read_tokens(f.string(), vocab));
    songs.push_back(detokenize_lenient(seqs.back(), vocab, nullptr, names.back()));
    piece_chords.push_back(chord_ids(songs.back()));
  }

  std::map<int, NGramModel> models;
  if (rc.with_cpr) {
    std::vector<ChordIds> reference =
        chord_corpus(list_files(rc.reference_dir, ".tokens"), vocab);
    if (reference.empty())
      throw ValidationError("eval: no .tokens files in " + rc.reference_dir);
    for (int n : rc.ngram_ns)
      if (!models.count(n)) models.emplace(n, build_ngram_model(reference, n));
  }

  std::vector<std::string> warnings;
  // column order: ags, then cpi/cpvr/cpr per requested n
  std::string header = "piece,ags";
  for (int n : rc.ngram_ns)
    header += ",cpi_" + std::to_string(n) + ",cpvr_" + std::to_string(n) + ",cpr_" +
              std::to_string(n);
  std::string csv = header + "\n";

  const size_t n_cols = 1 + 3 * rc.ngram_ns.size();
  std::vector<double> col_sum(n_cols, 0.0);
  std::vector<long> col_count(n_cols, 0);
  for (size_t i = 0; i < names.size(); ++i) {
    std::vector<std::optional<double>> cells(n_cols);
    cells[0] = ags(songs[i], filter);
    if (!cells[0].has_value())
      warnings.push_back("warning=" + names[i] + ": no comparable groove pairs");
    if (rc.with_cpr) {
      for (size_t j = 0; j < rc.ngram_ns.size(); ++j) {
        const int n = rc.ngram_ns[j];
        if (static_cast<int>(piece_chords[i].size()) < n) {
          warnings.push_back("warning=" + names[i] + ": fewer than " + std::to_string(n) +
                             " chords, n=" + std::to_string(n) + " skipped");
          continue;
        }
        const NGramModel& m = models.at(n);
        cells[1 + 3 * j] = cpi(piece_chords[i], n);
        cells[2 + 3 * j] = cpvr(piece_chords[i], m, n);
        cells[3 + 3 * j] = cpr(piece_chords[i], m, n, rc.lambda);
      }
    }
    csv += names[i];
    for (size_t c = 0; c < n_cols; ++c) {
      csv += "," + csv_cell(cells[c]);
      if (cells[c].has_value()) {
        col_sum[c] += *cells[c];
        col_count[c] += 1;
      }
    }
    csv += "\n";
  }
  csv += "aggregate";
  for (size_t c = 0; c < n_cols; ++c)
    csv += "," + (col_count[c] > 0 ? detail::fmt_double(col_sum[c] / col_count[c])
                                   : std::string());
  csv += "\n";
  write_text_file((fs::path(rc.out_dir) / "metrics.csv").string(), csv);

  std::vector<std::string> lines = {"pieces=" + std::to_string(names.size()),
                                    "lambda=" + detail::fmt_double(rc.lambda),
                                    "tracks=" + rc.track_filter,
                                    "workers=" + std::to_string(rc.workers)};
  lines.insert(lines.end(), warnings.begin(), warnings.end());
  for (const std::string& w : warnings) std::cerr << "eval: " << w << "\n";

  if (rc.checkpoint.empty()) {
    write_metadata(rc, nullptr, lines);
    return kExitOk;
  }

  // model-based half of the report
  Checkpoint<double> ck = load_checkpoint<double>(rc.checkpoint, vocab);
  std::vector<TokenSeq> prepared;
  for (const TokenSeq& s : seqs) prepared.push_back(prepare_for_training(s, ck.cfg));
  std::vector<EvalRecord> records =
      eval_records(ck.params, ck.cfg, vocab, prepared, rc.workers);

  std::string nt = "row,count,accuracy,mse\n";
  EvalRow tr = type_row(records);
  nt += "type," + std::to_string(tr.count) + "," + detail::fmt_double(tr.accuracy) + "," +
        detail::fmt_double(tr.mse) + "\n";
  for (TokenType t : {TokenType::Note, TokenType::Chord, TokenType::Phrase, TokenType::EOS}) {
    EvalRow row = composite_row(records, t);
    nt += std::string(token_type_name(t)) + "," + std::to_string(row.count) + "," +
          (row.count > 0 ? detail::fmt_double(row.accuracy) : std::string()) + "," +
          (row.count > 0 ? detail::fmt_double(row.mse) : std::string()) + "\n";
  }
  write_text_file((fs::path(rc.out_dir) / "next_token.csv").string(), nt);

  std::string trend = "type,bin,count,mean_mse\n";
  for (const TrendCurve& curve : mse_trend(records, 10))
    for (size_t b = 0; b < curve.bins.size(); ++b)
      trend += std::string(token_type_name(curve.type)) + "," + std::to_string(b) + "," +
               std::to_string(curve.bins[b].count) + "," +
               csv_cell(curve.bins[b].mean_mse) + "\n";
  write_text_file((fs::path(rc.out_dir) / "trend.csv").string(), trend);

  lines.push_back("eval_positions=" + std::to_string(records.size()));
  write_metadata(rc, &ck.cfg, lines);
  return kExitOk;
}

// --- Dispatch ----------------------------------------------------------------

inline int dispatch(const RunConfig& rc) {
  try {
    if (rc.command == "tokenize") return cmd_tokenize(rc) > 0 ? kExitParse : kExitOk;
    if (rc.command == "train") return cmd_train(rc);
    if (rc.command == "generate") return cmd_generate(rc);
    if (rc.command == "eval") return cmd_eval(rc);
    throw UsageError("cli: unknown command: " + rc.command);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hat::cli
