#include "ckgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ckgen/kernels.hpp"
#include "ckgen/rng.hpp"

namespace ckgen {

using nlohmann::json;

void ModelConfig::validate() const {
  if (vocab_size < 6) throw std::invalid_argument("model config: vocab_size too small");
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || max_source_len == 0 ||
      max_target_len == 0 || cs_encoder_hidden == 0)
    throw std::invalid_argument("model config: sizes must be >= 1");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("model config: d_model must be divisible by n_heads");
  if (injection_layer_index < 1 || injection_layer_index > n_layers)
    throw std::invalid_argument("model config: injection_layer_index out of range");
  if (mask_lm_prob <= 0.0 || mask_lm_prob > 1.0)
    throw std::invalid_argument("model config: mask_lm_prob must be in (0,1]");
}

InjectionMode injection_mode_from_string(const std::string& s) {
  if (s == "baseline") return InjectionMode::Baseline;
  if (s == "concat") return InjectionMode::Concat;
  if (s == "inject") return InjectionMode::Inject;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(InjectionMode mode) {
  switch (mode) {
    case InjectionMode::Baseline: return "baseline";
    case InjectionMode::Concat: return "concat";
    default: return "inject";
  }
}

Tensor& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (tensors_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  names_.push_back(name);
  return tensors_.emplace(name, Tensor(rows, cols)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return tensors_.count(name) > 0; }

double masked_lm_loss(const Tensor& logits, const std::vector<int>& row_targets,
                      const std::vector<std::size_t>& mask_rows) {
  if (row_targets.size() != logits.rows)
    throw std::invalid_argument("masked_lm_loss: one target per logits row required");
  if (mask_rows.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r : mask_rows) {
    if (r >= logits.rows) throw std::invalid_argument("masked_lm_loss: row out of range");
    const double* row = logits.row_ptr(r);
    double maxv = row[0];
    for (std::size_t c = 1; c < logits.cols; ++c) maxv = std::max(maxv, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) sum += std::exp(row[c] - maxv);
    total += maxv + std::log(sum) - row[row_targets[r]];
  }
  return total / static_cast<double>(mask_rows.size());
}

// ---------------------------------------------------------------------------

struct InjectionModel::Layout {
  std::vector<int> tokens;
  std::vector<std::size_t> segments;
  std::vector<std::size_t> concept_rows;
  std::vector<std::uint8_t> given_flags;  // parallel to concept_rows
  std::vector<std::size_t> target_rows;   // target tokens (+ closing [SEP] slot)
  std::vector<int> row_targets;           // true token per target row
  std::size_t src_sep_pos = 0;
};

class InjectionModel::Binder {
 public:
  Binder(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_.leaf(store_.get(name));
    bound_.emplace(name, v);
    return v;
  }

  const std::map<std::string, Var>& bound() const { return bound_; }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::map<std::string, Var> bound_;
};

struct InjectionModel::GraphOut {
  Var logits;
  std::vector<int> row_targets;
  std::vector<std::size_t> mask_rows;
  std::map<std::string, Var> bound_params;
};

namespace {

std::vector<std::size_t> iota_indices(std::size_t from, std::size_t count) {
  std::vector<std::size_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = from + i;
  return v;
}

std::vector<std::size_t> to_indices(const std::vector<int>& ids) {
  std::vector<std::size_t> v(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0) throw std::invalid_argument("negative token id");
    v[i] = static_cast<std::size_t>(ids[i]);
  }
  return v;
}

// Seq2seq attention mask: source rows/cols are bidirectional, target position
// attends to all source plus target positions up to itself.
Tensor seq2seq_mask(std::size_t len, std::size_t src_sep_pos) {
  Tensor m(len, len, kMaskValue);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j) {
      const bool j_in_src = j <= src_sep_pos;
      if (j_in_src || (i > src_sep_pos && j <= i)) m.at(i, j) = 0.0;
    }
  return m;
}

}  // namespace

InjectionModel::InjectionModel(ModelConfig config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t d = config_.d_model;
  const std::size_t h = config_.cs_encoder_hidden;
  const std::size_t v = config_.vocab_size;

  auto xavier = [&](const std::string& name, std::size_t r, std::size_t c) {
    Tensor& t = params_.add(name, r, c);
    const double limit = std::sqrt(6.0 / static_cast<double>(r + c));
    for (double& x : t.data) x = rng.next_symmetric(limit);
  };
  auto zeros = [&](const std::string& name, std::size_t r, std::size_t c) {
    params_.add(name, r, c);
  };
  auto ones = [&](const std::string& name, std::size_t r, std::size_t c) {
    params_.add(name, r, c).fill(1.0);
  };

  xavier("embed.tok", v, d);
  xavier("embed.pos", config_.max_positions(), d);
  xavier("embed.seg", 2, d);
  ones("embed.ln.g", 1, d);
  zeros("embed.ln.b", 1, d);

  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    xavier(p + "attn.wq", d, d);
    zeros(p + "attn.bq", 1, d);
    xavier(p + "attn.wk", d, d);
    zeros(p + "attn.bk", 1, d);
    xavier(p + "attn.wv", d, d);
    zeros(p + "attn.bv", 1, d);
    xavier(p + "attn.wo", d, d);
    zeros(p + "attn.bo", 1, d);
    ones(p + "ln1.g", 1, d);
    zeros(p + "ln1.b", 1, d);
    xavier(p + "ffn.w1", d, config_.d_ff());
    zeros(p + "ffn.b1", 1, config_.d_ff());
    xavier(p + "ffn.w2", config_.d_ff(), d);
    zeros(p + "ffn.b2", 1, d);
    ones(p + "ln2.g", 1, d);
    zeros(p + "ln2.b", 1, d);
  }

  for (const char* dir : {"fw", "bw"}) {
    const std::string p = std::string("inject.lstm.") + dir + ".";
    xavier(p + "w_ih", d, 4 * h);
    xavier(p + "w_hh", h, 4 * h);
    Tensor& b = params_.add(p + "b", 1, 4 * h);
    for (std::size_t j = h; j < 2 * h; ++j) b.data[j] = 1.0;  // forget gate
  }
  xavier("inject.proj.w", 2 * h, d);
  zeros("inject.proj.b", 1, d);
  xavier("inject.wq", d, d);
  xavier("inject.wk", d, d);
  xavier("inject.wv", d, d);
  xavier("inject.wout", d, d);

  xavier("out.w", d, v);
  zeros("out.b", 1, v);
}

InjectionModel::Layout InjectionModel::make_layout(const EncodedSample& sample,
                                                   InjectionMode mode,
                                                   const std::vector<int>* target_override) const {
  Layout lo;
  std::vector<int> src = sample.concept_tokens;
  std::size_t given_count = src.size();
  if (mode != InjectionMode::Baseline) {
    for (int t : sample.expansion_tokens) src.push_back(t);
    if (mode == InjectionMode::Concat && sample.expansion_tokens.empty())
      for (const auto& sent : sample.evidence)
        for (int t : sent) src.push_back(t);
  }
  if (given_count > config_.max_source_len)
    throw std::invalid_argument("sample " + sample.id + ": concept tokens exceed max_source_len");
  if (src.size() > config_.max_source_len) src.resize(config_.max_source_len);

  std::vector<int> tgt = target_override ? *target_override : sample.target_tokens;
  if (tgt.size() > config_.max_target_len) tgt.resize(config_.max_target_len);
  const bool closing_sep = target_override == nullptr;

  lo.tokens.push_back(Vocab::kCls);
  for (std::size_t i = 0; i < src.size(); ++i) {
    lo.concept_rows.push_back(lo.tokens.size());
    lo.given_flags.push_back(i < given_count ? 1 : 0);
    lo.tokens.push_back(src[i]);
  }
  lo.src_sep_pos = lo.tokens.size();
  lo.tokens.push_back(Vocab::kSep);
  for (int t : tgt) {
    lo.target_rows.push_back(lo.tokens.size());
    lo.row_targets.push_back(t);
    lo.tokens.push_back(t);
  }
  if (closing_sep) {
    lo.target_rows.push_back(lo.tokens.size());
    lo.row_targets.push_back(Vocab::kSep);
    lo.tokens.push_back(Vocab::kSep);
  }
  lo.segments.assign(lo.tokens.size(), 1);
  for (std::size_t i = 0; i <= lo.src_sep_pos; ++i) lo.segments[i] = 0;
  return lo;
}

Var InjectionModel::encode_cs_graph(Tape& tape, Binder& bind,
                                    const std::vector<std::vector<int>>& evidence) const {
  const std::size_t h = config_.cs_encoder_hidden;
  std::vector<Var> sentence_encodings;
  for (const auto& sent_full : evidence) {
    std::vector<int> sent = sent_full;
    if (sent.size() > config_.max_source_len) {
      sent.resize(config_.max_source_len);
      evidence_truncations_.fetch_add(1);
    }
    if (sent.empty()) continue;
    Var emb = tape.gather_rows(bind("embed.tok"), to_indices(sent));
    const std::size_t T = sent.size();

    auto run_dir = [&](const std::string& prefix, bool reverse) {
      Var w_ih = bind(prefix + ".w_ih");
      Var w_hh = bind(prefix + ".w_hh");
      Var b = bind(prefix + ".b");
      Var hprev = tape.constant(Tensor::zeros(1, h));
      Var cprev = tape.constant(Tensor::zeros(1, h));
      std::vector<Var> states(T);
      for (std::size_t step = 0; step < T; ++step) {
        const std::size_t t = reverse ? T - 1 - step : step;
        Var xt = tape.gather_rows(emb, {t});
        Var z = tape.add_rowvec(tape.add(tape.matmul(xt, w_ih), tape.matmul(hprev, w_hh)), b);
        Var ig = tape.sigmoid(tape.slice_cols(z, 0, h));
        Var fg = tape.sigmoid(tape.slice_cols(z, h, 2 * h));
        Var gg = tape.tanh_op(tape.slice_cols(z, 2 * h, 3 * h));
        Var og = tape.sigmoid(tape.slice_cols(z, 3 * h, 4 * h));
        Var c = tape.add(tape.hadamard(fg, cprev), tape.hadamard(ig, gg));
        Var hcur = tape.hadamard(og, tape.tanh_op(c));
        states[t] = hcur;
        hprev = hcur;
        cprev = c;
      }
      return states;
    };

    auto fw = run_dir("inject.lstm.fw", false);
    auto bw = run_dir("inject.lstm.bw", true);
    std::vector<Var> rows(T);
    for (std::size_t t = 0; t < T; ++t) rows[t] = tape.concat_cols({fw[t], bw[t]});
    sentence_encodings.push_back(tape.concat_rows(rows));
  }
  if (sentence_encodings.empty()) return Var{};
  Var all = sentence_encodings.size() == 1 ? sentence_encodings[0]
                                           : tape.concat_rows(sentence_encodings);
  return tape.add_rowvec(tape.matmul(all, bind("inject.proj.w")), bind("inject.proj.b"));
}

Var InjectionModel::inject_graph(Tape& tape, Binder& bind, Var h_hid, Var cs,
                                 const Tensor& mask) const {
  Var q = tape.matmul(h_hid, bind("inject.wq"));
  Var k = tape.matmul(cs, bind("inject.wk"));
  Var v = tape.matmul(cs, bind("inject.wv"));
  Var scores = tape.matmul_nt(q, k);
  if (config_.scaled_injection_softmax)
    scores = tape.scale(scores, 1.0 / std::sqrt(static_cast<double>(config_.d_model)));
  Var attn = tape.softmax_rows_masked(scores, mask);
  Var ctxt = tape.matmul(attn, v);
  return tape.matmul(ctxt, bind("inject.wout"));  // delta; caller adds the residual
}

InjectionModel::GraphOut InjectionModel::forward_graph(
    Tape& tape, const EncodedSample& sample, InjectionMode mode,
    const std::vector<int>* target_override,
    const std::vector<std::size_t>* masked_offsets) const {
  Layout lo = make_layout(sample, mode, target_override);
  std::vector<std::size_t> mask_rows;
  if (masked_offsets) {
    for (std::size_t off : *masked_offsets) {
      if (off >= lo.target_rows.size())
        throw std::invalid_argument("masked offset out of target range");
      lo.tokens[lo.target_rows[off]] = Vocab::kMask;
      mask_rows.push_back(off);
    }
  }

  const std::size_t len = lo.tokens.size();
  if (len > config_.max_positions())
    throw std::invalid_argument("sequence exceeds position table");

  Binder bind(tape, params_);
  Var emb = tape.add(
      tape.add(tape.gather_rows(bind("embed.tok"), to_indices(lo.tokens)),
               tape.gather_rows(bind("embed.pos"), iota_indices(0, len))),
      tape.gather_rows(bind("embed.seg"), lo.segments));
  Var x = tape.layer_norm_rows(emb, bind("embed.ln.g"), bind("embed.ln.b"));

  const Tensor attn_mask = seq2seq_mask(len, lo.src_sep_pos);
  const std::size_t dh = config_.d_model / config_.n_heads;

  for (std::size_t layer = 0; layer < config_.n_layers; ++layer) {
    const std::string p = "layer" + std::to_string(layer) + ".";
    Var q = tape.add_rowvec(tape.matmul(x, bind(p + "attn.wq")), bind(p + "attn.bq"));
    Var k = tape.add_rowvec(tape.matmul(x, bind(p + "attn.wk")), bind(p + "attn.bk"));
    Var v = tape.add_rowvec(tape.matmul(x, bind(p + "attn.wv")), bind(p + "attn.bv"));
    std::vector<Var> heads;
    for (std::size_t hh = 0; hh < config_.n_heads; ++hh) {
      Var qh = tape.slice_cols(q, hh * dh, (hh + 1) * dh);
      Var kh = tape.slice_cols(k, hh * dh, (hh + 1) * dh);
      Var vh = tape.slice_cols(v, hh * dh, (hh + 1) * dh);
      Var scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
      Var attn = tape.softmax_rows_masked(scores, attn_mask);
      heads.push_back(tape.matmul(attn, vh));
    }
    Var ctx = config_.n_heads == 1 ? heads[0] : tape.concat_cols(heads);
    Var attn_out = tape.add_rowvec(tape.matmul(ctx, bind(p + "attn.wo")), bind(p + "attn.bo"));
    x = tape.layer_norm_rows(tape.add(x, attn_out), bind(p + "ln1.g"), bind(p + "ln1.b"));
    Var ff = tape.add_rowvec(
        tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(x, bind(p + "ffn.w1")),
                                              bind(p + "ffn.b1"))),
                    bind(p + "ffn.w2")),
        bind(p + "ffn.b2"));
    x = tape.layer_norm_rows(tape.add(x, ff), bind(p + "ln2.g"), bind(p + "ln2.b"));

    if (mode == InjectionMode::Inject && layer + 1 == config_.injection_layer_index &&
        !sample.evidence.empty() && !lo.concept_rows.empty()) {
      Var cs = encode_cs_graph(tape, bind, sample.evidence);
      if (cs.valid()) {
        std::vector<std::uint8_t> expansion_flags(lo.given_flags.size());
        for (std::size_t i = 0; i < lo.given_flags.size(); ++i)
          expansion_flags[i] = lo.given_flags[i] ? 0 : 1;
        const Tensor joint =
            build_joint_mask(lo.given_flags, expansion_flags,
                             std::vector<std::uint8_t>(tape.value(cs).rows, 0));
        Var h_hid = tape.gather_rows(x, lo.concept_rows);
        Var delta = inject_graph(tape, bind, h_hid, cs, joint);
        x = tape.scatter_add_rows(x, lo.concept_rows, delta);
      }
    }
  }

  Var rows = tape.gather_rows(x, lo.target_rows);
  Var logits = tape.add_rowvec(tape.matmul(rows, bind("out.w")), bind("out.b"));

  GraphOut out;
  out.logits = logits;
  out.row_targets = lo.row_targets;
  out.mask_rows = std::move(mask_rows);
  out.bound_params = bind.bound();
  return out;
}

CsEncoding InjectionModel::encode_commonsense(
    const std::vector<std::vector<int>>& evidence) const {
  const std::size_t before = evidence_truncations_.load();
  Tape tape(false);
  Binder bind(tape, params_);
  Var cs = encode_cs_graph(tape, bind, evidence);
  CsEncoding enc;
  if (cs.valid())
    enc.encodings = tape.value(cs);
  else
    enc.encodings = Tensor(0, config_.d_model);
  enc.padding.assign(enc.encodings.rows, 0);
  enc.truncated = evidence_truncations_.load() - before;
  return enc;
}

Tensor InjectionModel::build_joint_mask(const std::vector<std::uint8_t>& given_flags,
                                        const std::vector<std::uint8_t>& expansion_flags,
                                        const std::vector<std::uint8_t>& cs_padding) {
  if (given_flags.size() != expansion_flags.size())
    throw std::invalid_argument("joint mask: flag vectors must align");
  Tensor m(given_flags.size(), cs_padding.size(), kMaskValue);
  for (std::size_t i = 0; i < given_flags.size(); ++i) {
    if (!given_flags[i]) continue;
    for (std::size_t j = 0; j < cs_padding.size(); ++j)
      if (!cs_padding[j]) m.at(i, j) = 0.0;
  }
  return m;
}

Tensor InjectionModel::inject(const Tensor& h_hid, const Tensor& cs_encodings,
                              const Tensor& joint_mask) const {
  if (h_hid.cols != config_.d_model || cs_encodings.cols != config_.d_model)
    throw std::invalid_argument("inject: row width must equal d_model");
  if (joint_mask.rows != h_hid.rows || joint_mask.cols != cs_encodings.rows)
    throw std::invalid_argument("inject: mask shape mismatch");
  Tape tape(false);
  Binder bind(tape, params_);
  Var h = tape.constant(h_hid);
  Var cs = tape.constant(cs_encodings);
  Var delta = inject_graph(tape, bind, h, cs, joint_mask);
  Var out = tape.add(h, delta);
  return tape.value(out);
}

Tensor InjectionModel::forward(const EncodedSample& sample, InjectionMode mode) const {
  Tape tape(false);
  GraphOut g = forward_graph(tape, sample, mode, nullptr, nullptr);
  return tape.value(g.logits);
}

std::vector<double> InjectionModel::next_token_log_probs(const EncodedSample& sample,
                                                         InjectionMode mode,
                                                         const std::vector<int>& prefix) const {
  if (prefix.size() + 1 > config_.max_target_len)
    throw std::invalid_argument("prefix exceeds max_target_len");
  std::vector<int> target = prefix;
  target.push_back(Vocab::kMask);
  Tape tape(false);
  GraphOut g = forward_graph(tape, sample, mode, &target, nullptr);
  const Tensor& logits = tape.value(g.logits);
  const std::size_t last = logits.rows - 1;
  auto allowed = [](std::size_t c) {
    return c == static_cast<std::size_t>(Vocab::kSep) || c >= 5;
  };
  std::vector<double> out(logits.cols, -HUGE_VAL);
  double maxv = -HUGE_VAL;
  for (std::size_t c = 0; c < logits.cols; ++c)
    if (allowed(c)) maxv = std::max(maxv, logits.at(last, c));
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.cols; ++c)
    if (allowed(c)) sum += std::exp(logits.at(last, c) - maxv);
  const double lse = maxv + std::log(sum);
  for (std::size_t c = 0; c < logits.cols; ++c)
    if (allowed(c)) out[c] = logits.at(last, c) - lse;
  return out;
}

double InjectionModel::training_loss(const EncodedSample& sample, InjectionMode mode,
                                     const std::vector<std::size_t>& masked_offsets) const {
  Tape tape(false);
  GraphOut g = forward_graph(tape, sample, mode, nullptr, &masked_offsets);
  return masked_lm_loss(tape.value(g.logits), g.row_targets, g.mask_rows);
}

std::vector<std::pair<std::string, Tensor>> InjectionModel::training_gradients(
    const EncodedSample& sample, InjectionMode mode,
    const std::vector<std::size_t>& masked_offsets) const {
  Tape tape(true);
  GraphOut g = forward_graph(tape, sample, mode, nullptr, &masked_offsets);
  std::vector<int> targets;
  for (std::size_t r : g.mask_rows) targets.push_back(g.row_targets[r]);
  Var loss = tape.mean_cross_entropy(g.logits, g.mask_rows, targets);
  tape.backward(loss);
  std::vector<std::pair<std::string, Tensor>> grads;
  for (const auto& [name, var] : g.bound_params) {
    const Tensor& grad = tape.grad(var);
    if (!grad.data.empty()) grads.emplace_back(name, grad);
  }
  return grads;
}

TrainReport InjectionModel::train(const std::vector<EncodedSample>& dataset, InjectionMode mode,
                                  const TrainOptions& opts) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  struct AdamState {
    Tensor m, v;
  };
  std::unordered_map<std::string, AdamState> adam;
  std::size_t step = 0;
  TrainReport report;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (opts.shuffle) {
      Rng shuffle_rng(config_.seed ^ (0x9e3779b97f4a7c15ULL + epoch));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    }

    double epoch_loss = 0.0;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const EncodedSample& sample = dataset[order[oi]];
      const std::size_t slots = sample.target_tokens.size() >= config_.max_target_len
                                    ? config_.max_target_len + 1
                                    : sample.target_tokens.size() + 1;
      Rng mask_rng(config_.seed ^ (epoch * 0x100000001b3ULL) ^ (order[oi] * 0x9e3779b9ULL + 7));
      std::vector<std::size_t> masked;
      for (std::size_t s = 0; s < slots; ++s)
        if (mask_rng.next_uniform() < config_.mask_lm_prob) masked.push_back(s);
      if (masked.empty()) masked.push_back(mask_rng.next_below(slots));

      Tape tape(true);
      GraphOut g = forward_graph(tape, sample, mode, nullptr, &masked);
      std::vector<int> targets;
      for (std::size_t r : g.mask_rows) targets.push_back(g.row_targets[r]);
      Var loss = tape.mean_cross_entropy(g.logits, g.mask_rows, targets);
      const double loss_value = tape.value(loss).data[0];
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", sample " + sample.id);
      epoch_loss += loss_value;
      tape.backward(loss);

      std::vector<std::pair<std::string, const Tensor*>> grads;
      double sq_norm = 0.0;
      for (const auto& [name, var] : g.bound_params) {
        const Tensor& grad = tape.grad(var);
        if (grad.data.empty()) continue;
        sq_norm += kernels::dot(grad.ptr(), grad.ptr(), grad.size());
        grads.emplace_back(name, &grad);
      }
      double clip_scale = 1.0;
      if (opts.grad_clip > 0.0) {
        const double norm = std::sqrt(sq_norm);
        if (norm > opts.grad_clip) clip_scale = opts.grad_clip / norm;
      }

      ++step;
      const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
      for (auto& [name, gptr] : grads) {
        Tensor& p = params_.get(name);
        AdamState& st = adam[name];
        if (st.m.data.empty()) {
          st.m = Tensor::zeros(p.rows, p.cols);
          st.v = Tensor::zeros(p.rows, p.cols);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double gi = gptr->data[i] * clip_scale;
          st.m.data[i] = opts.beta1 * st.m.data[i] + (1.0 - opts.beta1) * gi;
          st.v.data[i] = opts.beta2 * st.v.data[i] + (1.0 - opts.beta2) * gi * gi;
          const double mhat = st.m.data[i] / bc1;
          const double vhat = st.v.data[i] / bc2;
          p.data[i] -= opts.learning_rate * mhat / (std::sqrt(vhat) + opts.adam_eps);
        }
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return report;
}

void InjectionModel::save(const std::string& path, const Vocab& vocab,
                          const std::string& config_hash) const {
  json j;
  j["format"] = "ckgen-checkpoint";
  j["version"] = 1;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["config"] = {{"vocab_size", config_.vocab_size},
                 {"d_model", config_.d_model},
                 {"n_layers", config_.n_layers},
                 {"n_heads", config_.n_heads},
                 {"max_source_len", config_.max_source_len},
                 {"max_target_len", config_.max_target_len},
                 {"cs_encoder_hidden", config_.cs_encoder_hidden},
                 {"injection_layer_index", config_.injection_layer_index},
                 {"mask_lm_prob", config_.mask_lm_prob},
                 {"seed", config_.seed},
                 {"scaled_injection_softmax", config_.scaled_injection_softmax}};
  j["vocab"] = vocab.tokens();
  json params = json::object();
  for (const auto& name : params_.names()) {
    const Tensor& t = params_.get(name);
    params[name] = {{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

std::pair<InjectionModel, Vocab> InjectionModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "ckgen-checkpoint" || j.value("version", 0) != 1)
    throw std::runtime_error("unrecognized checkpoint format: " + path);
  const json& c = j.at("config");
  ModelConfig cfg;
  cfg.vocab_size = c.at("vocab_size").get<std::size_t>();
  cfg.d_model = c.at("d_model").get<std::size_t>();
  cfg.n_layers = c.at("n_layers").get<std::size_t>();
  cfg.n_heads = c.at("n_heads").get<std::size_t>();
  cfg.max_source_len = c.at("max_source_len").get<std::size_t>();
  cfg.max_target_len = c.at("max_target_len").get<std::size_t>();
  cfg.cs_encoder_hidden = c.at("cs_encoder_hidden").get<std::size_t>();
  cfg.injection_layer_index = c.at("injection_layer_index").get<std::size_t>();
  cfg.mask_lm_prob = c.at("mask_lm_prob").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.scaled_injection_softmax = c.at("scaled_injection_softmax").get<bool>();

  InjectionModel model(cfg);
  for (const auto& name : model.params_.names()) {
    const json& pj = j.at("params").at(name);
    Tensor& t = model.params_.get(name);
    if (pj.at("rows").get<std::size_t>() != t.rows ||
        pj.at("cols").get<std::size_t>() != t.cols)
      throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
    t.data = pj.at("data").get<std::vector<double>>();
  }
  Vocab vocab = Vocab::from_tokens(j.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != cfg.vocab_size)
    throw std::runtime_error("checkpoint vocab size mismatch");
  return {std::move(model), std::move(vocab)};
}

}  // namespace ckgen
