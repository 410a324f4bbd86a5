#pragma once
// Training loop: Adam, deterministic batch selection, config text round-trip,
// and versioned binary checkpoints (parameters + optimizer state) so that an
// interrupted run resumes on the exact loss trajectory.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hat/model.hpp"

namespace hat {

// --- Config text ---------------------------------------------------------------
// key=value lines; '#' starts a comment. The same format is accepted from
// config files on the command line and embedded in checkpoints, so doubles
// are printed with enough digits to round-trip exactly.

namespace detail {

inline int parse_int(const std::string& s, const std::string& key) {
  size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ParseError("config: bad integer for " + key + ": '" + s + "'");
  }
  if (used != s.size()) throw ParseError("config: bad integer for " + key + ": '" + s + "'");
  return v;
}

inline double parse_double(const std::string& s, const std::string& key) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("config: bad number for " + key + ": '" + s + "'");
  }
  if (used != s.size()) throw ParseError("config: bad number for " + key + ": '" + s + "'");
  return v;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string fmt_double(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace detail

inline std::string config_to_text(const HATConfig& c) {
  std::ostringstream o;
  o << "dim=" << c.dim << "\n";
  o << "emb_dims=";
  for (int i = 0; i < kNumCategories; ++i) o << (i ? "," : "") << c.emb_dims[i];
  o << "\n";
  o << "song_layers=" << c.song_layers << "\n";
  o << "song_heads=" << c.song_heads << "\n";
  o << "texture_layers=" << c.texture_layers << "\n";
  o << "texture_heads=" << c.texture_heads << "\n";
  o << "form_layers=" << c.form_layers << "\n";
  o << "form_heads=" << c.form_heads << "\n";
  o << "max_song_len=" << c.max_song_len << "\n";
  o << "max_phrase_chords=" << c.max_phrase_chords << "\n";
  o << "max_phrases=" << c.max_phrases << "\n";
  o << "loss_weights=";
  for (int i = 0; i < kNumCategories; ++i)
    o << (i ? "," : "") << detail::fmt_double(c.loss_weights[i]);
  o << "\n";
  o << "variant=" << variant_name(c.variant) << "\n";
  for (int i = 0; i < kNumCategories; ++i)
    o << "sampling_" << category_name(static_cast<Category>(i)) << "="
      << detail::fmt_double(c.sampling[i].temperature) << ","
      << detail::fmt_double(c.sampling[i].top_p) << "\n";
  o << "seed=" << c.seed << "\n";
  return o.str();
}

// Applies one key=value pair; unknown keys are rejected so typos in config
// files fail loudly instead of silently training the wrong model.
inline void set_config_kv(HATConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "dim") {
    c.dim = parse_int(value, key);
  } else if (key == "emb_dims") {
    auto parts = detail::split_list(value);
    if (parts.size() != kNumCategories)
      throw ParseError("config: emb_dims needs " + std::to_string(kNumCategories) + " entries");
    for (int i = 0; i < kNumCategories; ++i) c.emb_dims[i] = parse_int(parts[i], key);
  } else if (key == "song_layers") {
    c.song_layers = parse_int(value, key);
  } else if (key == "song_heads") {
    c.song_heads = parse_int(value, key);
  } else if (key == "texture_layers") {
    c.texture_layers = parse_int(value, key);
  } else if (key == "texture_heads") {
    c.texture_heads = parse_int(value, key);
  } else if (key == "form_layers") {
    c.form_layers = parse_int(value, key);
  } else if (key == "form_heads") {
    c.form_heads = parse_int(value, key);
  } else if (key == "max_song_len") {
    c.max_song_len = parse_int(value, key);
  } else if (key == "max_phrase_chords") {
    c.max_phrase_chords = parse_int(value, key);
  } else if (key == "max_phrases") {
    c.max_phrases = parse_int(value, key);
  } else if (key == "loss_weights") {
    auto parts = detail::split_list(value);
    if (parts.size() != kNumCategories)
      throw ParseError("config: loss_weights needs " + std::to_string(kNumCategories) +
                       " entries");
    for (int i = 0; i < kNumCategories; ++i) c.loss_weights[i] = parse_double(parts[i], key);
  } else if (key == "variant") {
    c.variant = variant_from_name(value);
  } else if (key.rfind("sampling_", 0) == 0) {
    std::string cat = key.substr(9);
    int ci = -1;
    for (int i = 0; i < kNumCategories; ++i)
      if (cat == category_name(static_cast<Category>(i))) ci = i;
    if (ci < 0) throw ParseError("config: unknown sampling category: " + cat);
    auto parts = detail::split_list(value);
    if (parts.size() != 2)
      throw ParseError("config: " + key + " wants temperature,top_p");
    c.sampling[ci].temperature = parse_double(parts[0], key);
    c.sampling[ci].top_p = parse_double(parts[1], key);
  } else if (key == "seed") {
    try {
      c.seed = std::stoull(value);
    } catch (const std::exception&) {
      throw ParseError("config: bad integer for seed: '" + value + "'");
    }
  } else {
    throw ParseError("config: unknown key: " + key);
  }
}

inline HATConfig config_from_text(const std::string& text) {
  HATConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: line " + std::to_string(lineno) + " has no '='");
    set_config_kv(c, line.substr(start, eq - start), line.substr(eq + 1));
  }
  return c;
}

// --- Data preparation ----------------------------------------------------------

// Makes an arbitrary tokenized song fit the model windows: long phrases are
// split into continuation parts, then the phrase count and total length are
// capped (cutting only at phrase boundaries).
inline TokenSeq prepare_for_training(const TokenSeq& seq, const HATConfig& cfg) {
  TokenSeq s = split_long_phrases(seq, cfg.max_phrase_chords);
  s = truncate_phrases(s, cfg.max_phrases);
  s = truncate_to_length(s, cfg.max_song_len);
  return s;
}

// --- Adam ---------------------------------------------------------------------

template <typename T>
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<Tensor<T>> m, v;  // first/second moments, in all_params order

  bool initialized() const { return !m.empty(); }
};

template <typename T>
void adam_update(const std::vector<Parameter<T>*>& params, AdamState<T>& st) {
  if (!st.initialized()) {
    for (auto* p : params) {
      st.m.emplace_back(p->value.rows, p->value.cols);
      st.v.emplace_back(p->value.rows, p->value.cols);
    }
  }
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw ValidationError("adam_update: optimizer state does not match the parameter list");

  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    if (st.m[i].rows != p.value.rows || st.m[i].cols != p.value.cols)
      throw ValidationError("adam_update: moment shape mismatch for " + p.name);
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      double g = static_cast<double>(p.grad.data[k]);
      double m = st.beta1 * static_cast<double>(st.m[i].data[k]) + (1.0 - st.beta1) * g;
      double v = st.beta2 * static_cast<double>(st.v[i].data[k]) + (1.0 - st.beta2) * g * g;
      st.m[i].data[k] = static_cast<T>(m);
      st.v[i].data[k] = static_cast<T>(v);
      double update = st.lr * (m / bc1) / (std::sqrt(v / bc2) + st.eps);
      p.value.data[k] = static_cast<T>(static_cast<double>(p.value.data[k]) - update);
    }
  }
}

template <typename T>
void adam_update(HATParameters<T>& P, AdamState<T>& st) {
  auto params = all_params(P);
  adam_update(params, st);
}

// --- Training steps ------------------------------------------------------------

// Which sequences step `step` trains on. Pure function of (seed, step) so a
// resumed run picks the same batches as an uninterrupted one.
inline std::vector<int> select_batch(size_t corpus_size, int batch_size, uint64_t seed,
                                     int64_t step) {
  if (corpus_size == 0) throw ValidationError("select_batch: empty corpus");
  if (batch_size < 1) throw ValidationError("select_batch: batch_size must be >= 1");
  Rng rng(mix_seed(seed, static_cast<uint64_t>(step)));
  std::vector<int> idx(batch_size);
  for (int& i : idx) i = static_cast<int>(rng.uniform_int(corpus_size));
  return idx;
}

// One optimizer step over an explicit batch. Returns the mean loss per
// predicted position; the gradient is of that same mean.
template <typename T>
double train_step(HATParameters<T>& P, const HATConfig& cfg, const Vocabulary& vocab,
                  const std::vector<const TokenSeq*>& batch, AdamState<T>& opt) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  int64_t positions = 0;
  for (const TokenSeq* s : batch) {
    if (s->size() < 2) throw ValidationError("train_step: sequence shorter than two tokens");
    positions += static_cast<int64_t>(s->size()) - 1;
  }

  zero_grads(P);
  double total = 0.0;
  for (size_t b = 0; b < batch.size(); ++b) {
    Tape<T> tp;
    auto loss = hat_loss(tp, P, cfg, vocab, *batch[b]);
    double raw = static_cast<double>(tp.value(loss).data[0]);
    if (!std::isfinite(raw))
      throw std::runtime_error("train_step: non-finite loss (" + std::to_string(raw) +
                               ") on batch sequence " + std::to_string(b) + " of " +
                               std::to_string(batch.size()) + " at optimizer step " +
                               std::to_string(opt.step + 1));
    total += raw;
    // Parameter gradients accumulate across the batch; scaling each term by
    // 1/positions makes the accumulated gradient the gradient of the mean.
    tp.backward(tp.scale(loss, static_cast<T>(1.0 / static_cast<double>(positions))));
  }

  adam_update(P, opt);
  return total / static_cast<double>(positions);
}

struct TrainOptions {
  int64_t max_steps = 500;      // global optimizer-step target (resume continues toward it)
  int batch_size = 2;
  double lr = 1e-4;
  double loss_threshold = 0.05;  // stop early below this mean loss; <= 0 disables
  uint64_t seed = 1;
};

struct StepRecord {
  int64_t step = 0;
  double loss = 0.0;
};

// Runs until the optimizer step count reaches opts.max_steps or the loss
// dips under the threshold. Returns one record per executed step; `on_step`
// (if given) fires after each update, for logging and checkpointing.
template <typename T>
std::vector<StepRecord> train_loop(HATParameters<T>& P, const HATConfig& cfg,
                                   const Vocabulary& vocab, const std::vector<TokenSeq>& corpus,
                                   AdamState<T>& opt, const TrainOptions& opts,
                                   const std::function<void(const StepRecord&)>& on_step = {}) {
  if (corpus.empty()) throw ValidationError("train_loop: empty corpus");
  for (const TokenSeq& s : corpus)
    if (static_cast<int>(s.size()) > cfg.max_song_len)
      throw ValidationError("train_loop: corpus sequence longer than max_song_len; prepare it");
  opt.lr = opts.lr;

  std::vector<StepRecord> log;
  while (opt.step < opts.max_steps) {
    auto idx = select_batch(corpus.size(), opts.batch_size, opts.seed, opt.step);
    std::vector<const TokenSeq*> batch;
    batch.reserve(idx.size());
    for (int i : idx) batch.push_back(&corpus[i]);
    StepRecord rec;
    rec.loss = train_step(P, cfg, vocab, batch, opt);
    rec.step = opt.step;
    log.push_back(rec);
    if (on_step) on_step(rec);
    if (opts.loss_threshold > 0 && rec.loss < opts.loss_threshold) break;
  }
  return log;
}

// --- Checkpoints ----------------------------------------------------------------
// Layout (version 1, all integers and doubles little-endian):
//   "HATCKPT\n"  u32 version
//   u32 config_len, config text
//   u64 vocabulary hash
//   u32 param count; per param: u32 name_len, name, u32 rows, u32 cols, values
//   u8 has_optimizer; if set: lr, beta1, beta2, eps, u64 step,
//                     then per param the m and v tensors in table order
// Values are stored as 64-bit regardless of the in-memory precision.

namespace detail {

constexpr char kCkptMagic[8] = {'H', 'A', 'T', 'C', 'K', 'P', 'T', '\n'};
constexpr uint32_t kCkptVersion = 1;

inline void write_u32(std::ostream& o, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& o, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& o, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(o, bits);
}

inline uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

template <typename T>
void write_tensor(std::ostream& o, const Tensor<T>& t) {
  for (T x : t.data) write_f64(o, static_cast<double>(x));
}

template <typename T>
void read_tensor(std::istream& in, Tensor<T>& t) {
  for (T& x : t.data) x = static_cast<T>(read_f64(in));
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, HATParameters<T>& P, const HATConfig& cfg,
                     const Vocabulary& vocab, const AdamState<T>* opt = nullptr) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("checkpoint: cannot open for writing: " + path);

  out.write(detail::kCkptMagic, 8);
  detail::write_u32(out, detail::kCkptVersion);
  std::string cfg_text = config_to_text(cfg);
  detail::write_u32(out, static_cast<uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  detail::write_u64(out, vocab.hash());

  auto params = all_params(P);
  detail::write_u32(out, static_cast<uint32_t>(params.size()));
  for (const Parameter<T>* p : params) {
    detail::write_u32(out, static_cast<uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_u32(out, static_cast<uint32_t>(p->value.rows));
    detail::write_u32(out, static_cast<uint32_t>(p->value.cols));
    detail::write_tensor(out, p->value);
  }

  if (opt && opt->initialized()) {
    if (opt->m.size() != params.size())
      throw ValidationError("checkpoint: optimizer state does not match the parameter list");
    out.put(1);
    detail::write_f64(out, opt->lr);
    detail::write_f64(out, opt->beta1);
    detail::write_f64(out, opt->beta2);
    detail::write_f64(out, opt->eps);
    detail::write_u64(out, static_cast<uint64_t>(opt->step));
    for (size_t i = 0; i < params.size(); ++i) {
      detail::write_tensor(out, opt->m[i]);
      detail::write_tensor(out, opt->v[i]);
    }
  } else {
    out.put(0);
  }
  if (!out) throw ParseError("checkpoint: write failed: " + path);
}

template <typename T>
struct Checkpoint {
  HATConfig cfg;
  HATParameters<T> params;
  bool has_optimizer = false;
  AdamState<T> opt;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint: cannot open: " + path);

  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw ParseError("checkpoint: not a checkpoint file: " + path);
  uint32_t version = detail::read_u32(in);
  if (version != detail::kCkptVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));

  uint32_t cfg_len = detail::read_u32(in);
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) throw ParseError("checkpoint: truncated file");

  Checkpoint<T> ck;
  ck.cfg = config_from_text(cfg_text);
  ck.cfg.validate();

  uint64_t vhash = detail::read_u64(in);
  if (vhash != vocab.hash())
    throw ParseError("checkpoint: vocabulary hash mismatch (file " + to_hex(vhash) +
                     ", current " + to_hex(vocab.hash()) + ")");

  Rng rng(0);  // values are overwritten below
  ck.params = init_hat<T>(ck.cfg, vocab, rng);
  auto params = all_params(ck.params);

  uint32_t count = detail::read_u32(in);
  if (count != params.size())
    throw ParseError("checkpoint: expected " + std::to_string(params.size()) +
                     " parameters, file has " + std::to_string(count));
  for (Parameter<T>* p : params) {
    uint32_t name_len = detail::read_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ParseError("checkpoint: truncated file");
    if (name != p->name)
      throw ParseError("checkpoint: parameter order mismatch: expected " + p->name + ", found " +
                       name);
    int rows = static_cast<int>(detail::read_u32(in));
    int cols = static_cast<int>(detail::read_u32(in));
    if (rows != p->value.rows || cols != p->value.cols)
      throw ParseError("checkpoint: shape mismatch for " + name);
    detail::read_tensor(in, p->value);
  }

  int has_opt = in.get();
  if (has_opt == std::istream::traits_type::eof())
    throw ParseError("checkpoint: truncated file");
  if (has_opt == 1) {
    ck.has_optimizer = true;
    ck.opt.lr = detail::read_f64(in);
    ck.opt.beta1 = detail::read_f64(in);
    ck.opt.beta2 = detail::read_f64(in);
    ck.opt.eps = detail::read_f64(in);
    ck.opt.step = static_cast<int64_t>(detail::read_u64(in));
    for (Parameter<T>* p : params) {
      Tensor<T> m(p->value.rows, p->value.cols), v(p->value.rows, p->value.cols);
      detail::read_tensor(in, m);
      detail::read_tensor(in, v);
      ck.opt.m.push_back(std::move(m));
      ck.opt.v.push_back(std::move(v));
    }
  } else if (has_opt != 0) {
    throw ParseError("checkpoint: corrupt optimizer flag");
  }
  return ck;
}

}  // namespace hat
