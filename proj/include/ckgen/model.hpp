#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ckgen/autograd.hpp"
#include "ckgen/tensor.hpp"
#include "ckgen/tokenizer.hpp"

namespace ckgen {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_source_len = 32;
  std::size_t max_target_len = 24;
  std::size_t cs_encoder_hidden = 16;   // bi-LSTM hidden size per direction
  std::size_t injection_layer_index = 1;  // inject after this many encoder layers
  double mask_lm_prob = 0.3;
  std::uint64_t seed = 42;
  bool scaled_injection_softmax = false;  // paper equation carries no 1/sqrt(d)

  std::size_t d_ff() const { return 4 * d_model; }
  // [CLS] + source + [SEP] + target + [SEP]
  std::size_t max_positions() const { return max_source_len + max_target_len + 3; }
  void validate() const;
};

enum class InjectionMode { Baseline, Concat, Inject };

InjectionMode injection_mode_from_string(const std::string& s);
std::string to_string(InjectionMode mode);

// One tokenized instance. Source layout is
//   [CLS] concept_tokens expansion_tokens [SEP] target_tokens [SEP]
// Baseline mode drops expansion tokens and ignores evidence; concat mode
// appends expansion tokens (or, lacking those, the evidence words) to the
// source; inject mode routes evidence through the bi-LSTM attention.
struct EncodedSample {
  std::string id;
  std::vector<int> concept_tokens;
  std::vector<int> expansion_tokens;
  std::vector<std::vector<int>> evidence;
  std::vector<int> target_tokens;  // closing [SEP] is implicit
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, std::size_t rows, std::size_t cols);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> tensors_;
};

struct CsEncoding {
  Tensor encodings;                    // (evidence tokens x d_model)
  std::vector<std::uint8_t> padding;   // 1 = padding row (none in-process)
  std::size_t truncated = 0;           // sentences cut to max_source_len
};

struct TrainOptions {
  std::size_t epochs = 30;
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // global norm; 0 disables
  bool shuffle = true;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

// Mean cross-entropy over the masked rows of a logits matrix; zero when no
// rows are masked. row_targets holds the true token id for every row.
double masked_lm_loss(const Tensor& logits, const std::vector<int>& row_targets,
                      const std::vector<std::size_t>& mask_rows);

// UniLM-style stack: shared transformer encoder over (source [SEP] target)
// with a seq2seq attention mask and a masked-LM objective, plus the
// commonsense attention-injection layer applied after encoder layer
// `injection_layer_index`.
class InjectionModel {
 public:
  explicit InjectionModel(ModelConfig config);
  InjectionModel(InjectionModel&& other) noexcept
      : config_(other.config_),
        params_(std::move(other.params_)),
        evidence_truncations_(other.evidence_truncations_.load()) {}

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  CsEncoding encode_commonsense(const std::vector<std::vector<int>>& evidence) const;

  // M[i][j] = 0 where i is a given-concept position and j a non-padding
  // evidence position; large-negative otherwise.
  static Tensor build_joint_mask(const std::vector<std::uint8_t>& given_flags,
                                 const std::vector<std::uint8_t>& expansion_flags,
                                 const std::vector<std::uint8_t>& cs_padding);

  // A = softmax(Q K^T + M), H_ctxt = A V, H_attn = H_ctxt W_out + H_hid,
  // with Q projected from h_hid and K, V from cs_encodings.
  Tensor inject(const Tensor& h_hid, const Tensor& cs_encodings,
                const Tensor& joint_mask) const;

  // Logits at the target positions (target tokens plus the closing [SEP]
  // slot); rows = |target|+1, cols = vocab.
  Tensor forward(const EncodedSample& sample, InjectionMode mode) const;

  // Log-distribution of the token following `prefix` in generation order.
  // Special tokens other than [SEP] (the end marker) are masked out.
  std::vector<double> next_token_log_probs(const EncodedSample& sample, InjectionMode mode,
                                           const std::vector<int>& prefix) const;

  // Loss for one sample under a fixed set of masked target offsets
  // (0..|target| where |target| denotes the closing [SEP] slot).
  double training_loss(const EncodedSample& sample, InjectionMode mode,
                       const std::vector<std::size_t>& masked_offsets) const;

  // Analytic parameter gradients of training_loss, for the parameters the
  // forward actually touched.
  std::vector<std::pair<std::string, Tensor>> training_gradients(
      const EncodedSample& sample, InjectionMode mode,
      const std::vector<std::size_t>& masked_offsets) const;

  // Deterministic Adam training; throws std::runtime_error on NaN loss.
  TrainReport train(const std::vector<EncodedSample>& dataset, InjectionMode mode,
                    const TrainOptions& opts);

  std::size_t evidence_truncations() const { return evidence_truncations_.load(); }

  // Versioned JSON tensor container with a config header; config_hash, when
  // given, is stamped into the file for rerun verification.
  void save(const std::string& path, const Vocab& vocab,
            const std::string& config_hash = "") const;
  static std::pair<InjectionModel, Vocab> load(const std::string& path);

 private:
  struct Layout;
  struct GraphOut;
  class Binder;

  Layout make_layout(const EncodedSample& sample, InjectionMode mode,
                     const std::vector<int>* target_override) const;
  GraphOut forward_graph(Tape& tape, const EncodedSample& sample, InjectionMode mode,
                         const std::vector<int>* target_override,
                         const std::vector<std::size_t>* masked_offsets) const;
  Var encode_cs_graph(Tape& tape, Binder& bind,
                      const std::vector<std::vector<int>>& evidence) const;
  Var inject_graph(Tape& tape, Binder& bind, Var h_hid, Var cs, const Tensor& mask) const;

  ModelConfig config_;
  ParamStore params_;
  mutable std::atomic<std::size_t> evidence_truncations_{0};
};

}  // namespace ckgen
