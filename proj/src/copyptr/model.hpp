// Copyright 2026 The copyptr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Sequence-to-sequence parser with a copy pointer.
//
// The encoder turns source tokens into states e_1..e_n. At each step the
// decoder produces a state d_t from which
//
//   g_t      = softmax(OutputEmbed(d_t))              over ontology tokens
//   c_t, w_t = MHA(e_1..e_n, Linear(d_t))             over source positions
//   P_copy   = sigmoid(Linear([d_t; w_t]))
//   o_t      = [(1 - P_copy) g_t ; P_copy c_t]
//
// so the output support is the ontology vocabulary followed by the n source
// positions. c_t is the head average of the attention weights.

#ifndef COPYPTR_MODEL_HPP_
#define COPYPTR_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copyptr/corpus.hpp"
#include "copyptr/graph.hpp"

namespace copyptr {

enum class EncoderKind { kRecurrent, kAttention };

const char* encoder_kind_name(EncoderKind kind);
std::optional<EncoderKind> encoder_kind_from_name(std::string_view name);

struct ModelConfig {
  EncoderKind kind = EncoderKind::kRecurrent;
  int layers = 2;
  int hidden = 64;
  int embed = 64;
  int heads = 4;
  double dropout = 0.4;
  int source_vocab = 0;
  int ontology_vocab = 0;
  // Ontology index of the closing bracket.
  int close_index = 0;

  // Throws kInvalidConfig.
  void validate() const;

  // key=value lines.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderOutput {
  ad::Var states;  // n x hidden
  ad::Var states_t;  // hidden x n
  std::vector<int> source_ids;
  // Per-source projections reused at every decoder step.
  ad::Var copy_keys;
  ad::Var copy_values;
  std::vector<ad::Var> cross_keys;    // attention decoder, per layer
  std::vector<ad::Var> cross_values;

  std::size_t length() const { return source_ids.size(); }
};

struct DecoderStep {
  ad::Var d;       // 1 x hidden
  ad::Var g;       // 1 x ontology_vocab
  ad::Var c;       // 1 x n
  ad::Var omega;   // 1 x hidden
  ad::Var p_copy;  // 1 x 1
  ad::Var o;       // 1 x (ontology_vocab + n)
};

// Everything the decoder carries between steps for one hypothesis.
struct DecoderState {
  // recurrent
  std::vector<ad::Var> h;
  std::vector<ad::Var> c;
  ad::Var feed;
  // attention: projected self-attention keys/values of earlier positions
  std::vector<std::vector<ad::Var>> self_keys;
  std::vector<std::vector<ad::Var>> self_values;
  int position = 0;
};

class CopyPtrModel {
 public:
  // Throws kInvalidConfig.
  CopyPtrModel(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  // Throws kEmptyInput for an empty sequence.
  EncoderOutput encode(ad::Graph& g, std::span<const int> source_ids) const;
  DecoderState initial_state(ad::Graph& g, const EncoderOutput& enc) const;

  // Advances `state` by one step fed with `previous` (nullopt = start of
  // sequence). Throws kInvalidPreviousSymbol.
  DecoderStep step(ad::Graph& g, const EncoderOutput& enc, DecoderState& state,
                   std::optional<Symbol> previous) const;

  // Teacher-forced -(1/T) sum_t log o_t[target_t]. Throws
  // kTargetSourceMismatch.
  ad::Var sequence_loss(ad::Graph& g, std::span<const int> source_ids,
                        std::span<const Symbol> target) const;

  // Fraction of target symbols that are the argmax of o_t under teacher
  // forcing (evaluation mode).
  double teacher_forced_accuracy(std::span<const int> source_ids,
                                 std::span<const Symbol> target) const;

  // Index of `symbol` in the o_t support.
  int output_index(const Symbol& symbol, std::size_t source_length) const;
  Symbol symbol_at(int output_index) const;

  void save(const std::filesystem::path& dir) const;
  // Reads model.cfg + params.bin; throws kCheckpointMismatch when the
  // sidecar disagrees with the stored weights.
  static CopyPtrModel load(const std::filesystem::path& dir);

 private:
  struct LstmWeights {
    std::size_t wx, wh, b;
  };
  struct MhaWeights {
    std::size_t wq, wk, wv, wo;
  };
  struct TransformerLayer {
    MhaWeights self_attn;
    std::optional<MhaWeights> cross_attn;
    std::size_t ln1_g, ln1_b, ln2_g, ln2_b, ln3_g = 0, ln3_b = 0;
    std::size_t ff1_w, ff1_b, ff2_w, ff2_b;
  };

  std::size_t add_matrix(const std::string& name, std::size_t rows,
                         std::size_t cols, Rng& rng);
  std::size_t add_constant(const std::string& name, std::size_t rows,
                           std::size_t cols, double value);
  std::size_t add_embedding(const std::string& name, std::size_t rows,
                            std::size_t cols, Rng& rng);
  MhaWeights add_mha(const std::string& prefix, Rng& rng);
  TransformerLayer add_transformer_layer(const std::string& prefix, bool cross,
                                         Rng& rng);

  ad::Var p(ad::Graph& g, std::size_t index) const {
    return g.param(params_[index]);
  }
  ad::Var lstm_cell(ad::Graph& g, const LstmWeights& w, ad::Var x_proj,
                    ad::Var& h, ad::Var& c) const;
  ad::Var feed_embedding(ad::Graph& g, const EncoderOutput& enc,
                         std::optional<Symbol> previous) const;
  ad::Var transformer_block(ad::Graph& g, const TransformerLayer& layer,
                            ad::Var x, ad::Var self_k, ad::Var self_v,
                            ad::Var cross_k, ad::Var cross_v) const;

  ModelConfig config_;
  ad::ParameterSet params_;

  std::size_t source_embed_ = 0;
  std::size_t ontology_embed_ = 0;  // ontology_vocab + 1 rows, last is BOS

  // recurrent
  std::vector<LstmWeights> enc_fwd_, enc_bwd_, dec_lstm_;
  std::size_t dec_attn_w_ = 0, dec_comb_w_ = 0, dec_comb_b_ = 0;

  // attention
  std::size_t enc_in_ = 0, dec_in_ = 0;
  std::vector<TransformerLayer> enc_layers_, dec_layers_;

  // output heads
  std::size_t out_w_ = 0, out_b_ = 0;
  std::size_t query_w_ = 0, query_b_ = 0;
  MhaWeights copy_attn_{};
  std::size_t gate_w_ = 0, gate_b_ = 0;
};

// Multi-head attention of `queries` (m x H, unprojected) over keys/values
// that are already projected (n x H). Returns the output (m x H, after the
// output projection) and the head-averaged weights (m x n).
struct MhaResult {
  ad::Var out;
  ad::Var weights;
};
MhaResult multi_head_attention(ad::Var queries, ad::Var wq, ad::Var keys,
                               ad::Var values, ad::Var wo, int heads);

struct Decoded {
  EncodedTarget symbols;
  // Brackets balance and every copy sits inside a node.
  bool well_formed = false;
  double log_prob = 0.0;

  double mean_log_prob() const {
    return symbols.empty() ? 0.0 : log_prob / symbols.size();
  }
};

// Argmax decoding (ties to the lowest support index) until the bracket
// balance returns to zero or `max_len` symbols were emitted.
Decoded greedy_decode(const CopyPtrModel& model,
                      std::span<const int> source_ids, int max_len);

// Beam search ranked by mean per-symbol log-probability. Width 1 reproduces
// greedy_decode exactly.
Decoded beam_decode(const CopyPtrModel& model, std::span<const int> source_ids,
                    int beam_width, int max_len);

bool well_formed(std::span<const Symbol> symbols, int close_index);

}  // namespace copyptr

#endif  // COPYPTR_MODEL_HPP_
