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


#include "copyptr/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "copyptr/error.hpp"
#include "copyptr/optim.hpp"

namespace copyptr {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using ad::concat_cols;
using ad::sigmoid;

const char* encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::kRecurrent ? "lstm" : "transformer";
}

std::optional<EncoderKind> encoder_kind_from_name(std::string_view name) {
  if (name == "lstm" || name == "recurrent") return EncoderKind::kRecurrent;
  if (name == "transformer" || name == "attention") return EncoderKind::kAttention;
  return std::nullopt;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidConfig, msg);
  };
  if (layers < 1) fail("layers must be >= 1");
  if (hidden < 2) fail("hidden must be >= 2");
  if (embed < 1) fail("embed must be >= 1");
  if (heads < 1 || hidden % heads != 0) fail("hidden must be a multiple of heads");
  if (kind == EncoderKind::kRecurrent && hidden % 2 != 0) {
    fail("hidden must be even for the bidirectional encoder");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (source_vocab < 1) fail("empty source vocabulary");
  if (ontology_vocab < 1) fail("empty ontology vocabulary");
  if (close_index < 0 || close_index >= ontology_vocab) {
    fail("close_index outside the ontology vocabulary");
  }
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "encoder=" << encoder_kind_name(kind) << "\n"
      << "layers=" << layers << "\n"
      << "hidden=" << hidden << "\n"
      << "embed=" << embed << "\n"
      << "heads=" << heads << "\n"
      << "dropout=" << dropout << "\n"
      << "source_vocab=" << source_vocab << "\n"
      << "ontology_vocab=" << ontology_vocab << "\n"
      << "close_index=" << close_index << "\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, "expected key=value", lineno);
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "encoder") {
        auto k = encoder_kind_from_name(value);
        if (!k) throw Error(ErrorCode::kInvalidConfig, "unknown encoder " + value, lineno);
        c.kind = *k;
      } else if (key == "layers") {
        c.layers = std::stoi(value);
      } else if (key == "hidden") {
        c.hidden = std::stoi(value);
      } else if (key == "embed") {
        c.embed = std::stoi(value);
      } else if (key == "heads") {
        c.heads = std::stoi(value);
      } else if (key == "dropout") {
        c.dropout = std::stod(value);
      } else if (key == "source_vocab") {
        c.source_vocab = std::stoi(value);
      } else if (key == "ontology_vocab") {
        c.ontology_vocab = std::stoi(value);
      } else if (key == "close_index") {
        c.close_index = std::stoi(value);
      } else {
        throw Error(ErrorCode::kInvalidConfig, "unknown key " + key, lineno);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidConfig, "bad value for " + key, lineno);
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

Tensor sinusoid_row(int position, std::size_t width) {
  Tensor t(1, width);
  for (std::size_t i = 0; i < width; ++i) {
    const double k = static_cast<double>(i / 2 * 2) / static_cast<double>(width);
    const double angle = position / std::pow(10000.0, k);
    t[i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return t;
}

Tensor sinusoid(std::size_t n, std::size_t width) {
  Tensor t(n, width);
  for (std::size_t r = 0; r < n; ++r) {
    Tensor row = sinusoid_row(static_cast<int>(r), width);
    std::copy(row.data(), row.data() + width, t.data() + r * width);
  }
  return t;
}

std::string layer_name(const std::string& prefix, int l) {
  return prefix + ".l" + std::to_string(l);
}

}  // namespace

std::size_t CopyPtrModel::add_matrix(const std::string& name, std::size_t rows,
                                     std::size_t cols, Rng& rng) {
  return params_.add(name, xavier(rows, cols, rng));
}

std::size_t CopyPtrModel::add_constant(const std::string& name,
                                       std::size_t rows, std::size_t cols,
                                       double value) {
  return params_.add(name, Tensor(rows, cols, value));
}

std::size_t CopyPtrModel::add_embedding(const std::string& name,
                                        std::size_t rows, std::size_t cols,
                                        Rng& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return params_.add(name, std::move(t));
}

CopyPtrModel::MhaWeights CopyPtrModel::add_mha(const std::string& prefix,
                                               Rng& rng) {
  const auto h = static_cast<std::size_t>(config_.hidden);
  MhaWeights w{};
  w.wq = add_matrix(prefix + ".wq", h, h, rng);
  w.wk = add_matrix(prefix + ".wk", h, h, rng);
  w.wv = add_matrix(prefix + ".wv", h, h, rng);
  w.wo = add_matrix(prefix + ".wo", h, h, rng);
  return w;
}

CopyPtrModel::TransformerLayer CopyPtrModel::add_transformer_layer(
    const std::string& prefix, bool cross, Rng& rng) {
  const auto h = static_cast<std::size_t>(config_.hidden);
  TransformerLayer layer{};
  layer.self_attn = add_mha(prefix + ".self", rng);
  layer.ln1_g = add_constant(prefix + ".ln1.g", 1, h, 1.0);
  layer.ln1_b = add_constant(prefix + ".ln1.b", 1, h, 0.0);
  if (cross) {
    layer.cross_attn = add_mha(prefix + ".cross", rng);
    layer.ln3_g = add_constant(prefix + ".ln3.g", 1, h, 1.0);
    layer.ln3_b = add_constant(prefix + ".ln3.b", 1, h, 0.0);
  }
  layer.ff1_w = add_matrix(prefix + ".ff1.w", h, 4 * h, rng);
  layer.ff1_b = add_constant(prefix + ".ff1.b", 1, 4 * h, 0.0);
  layer.ff2_w = add_matrix(prefix + ".ff2.w", 4 * h, h, rng);
  layer.ff2_b = add_constant(prefix + ".ff2.b", 1, h, 0.0);
  layer.ln2_g = add_constant(prefix + ".ln2.g", 1, h, 1.0);
  layer.ln2_b = add_constant(prefix + ".ln2.b", 1, h, 0.0);
  return layer;
}

CopyPtrModel::CopyPtrModel(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  const auto H = static_cast<std::size_t>(config_.hidden);
  const auto E = static_cast<std::size_t>(config_.embed);
  const auto O = static_cast<std::size_t>(config_.ontology_vocab);
  const auto S = static_cast<std::size_t>(config_.source_vocab);

  source_embed_ = add_embedding("embed.source", S, E, rng);
  ontology_embed_ = add_embedding("embed.ontology", O + 1, E, rng);

  auto add_lstm = [&](const std::string& prefix, std::size_t in,
                      std::size_t hid) {
    LstmWeights w{};
    w.wx = add_matrix(prefix + ".wx", in, 4 * hid, rng);
    w.wh = add_matrix(prefix + ".wh", hid, 4 * hid, rng);
    // Gate order i, f, g, o; the forget gate starts open.
    Tensor b(1, 4 * hid);
    for (std::size_t k = hid; k < 2 * hid; ++k) b[k] = 1.0;
    w.b = params_.add(prefix + ".b", std::move(b));
    return w;
  };

  if (config_.kind == EncoderKind::kRecurrent) {
    for (int l = 0; l < config_.layers; ++l) {
      const std::size_t in = l == 0 ? E : H;
      enc_fwd_.push_back(add_lstm(layer_name("enc", l) + ".fwd", in, H / 2));
      enc_bwd_.push_back(add_lstm(layer_name("enc", l) + ".bwd", in, H / 2));
    }
    for (int l = 0; l < config_.layers; ++l) {
      const std::size_t in = l == 0 ? E + H : H;
      dec_lstm_.push_back(add_lstm(layer_name("dec", l), in, H));
    }
    dec_attn_w_ = add_matrix("dec.attn.w", H, H, rng);
    dec_comb_w_ = add_matrix("dec.comb.w", 2 * H, H, rng);
    dec_comb_b_ = add_constant("dec.comb.b", 1, H, 0.0);
  } else {
    enc_in_ = add_matrix("enc.in", E, H, rng);
    for (int l = 0; l < config_.layers; ++l) {
      enc_layers_.push_back(add_transformer_layer(layer_name("enc", l), false, rng));
    }
    dec_in_ = add_matrix("dec.in", E, H, rng);
    for (int l = 0; l < config_.layers; ++l) {
      dec_layers_.push_back(add_transformer_layer(layer_name("dec", l), true, rng));
    }
  }

  out_w_ = add_matrix("out.w", H, O, rng);
  out_b_ = add_constant("out.b", 1, O, 0.0);
  query_w_ = add_matrix("copy.query.w", H, H, rng);
  query_b_ = add_constant("copy.query.b", 1, H, 0.0);
  copy_attn_ = add_mha("copy.mha", rng);
  gate_w_ = add_matrix("gate.w", 2 * H, 1, rng);
  gate_b_ = add_constant("gate.b", 1, 1, 0.0);
}

// ---------------------------------------------------------------------------
// Building blocks

MhaResult multi_head_attention(Var queries, Var wq, Var keys, Var values,
                               Var wo, int heads) {
  const std::size_t H = keys.cols();
  if (heads < 1 || H % static_cast<std::size_t>(heads) != 0 ||
      values.cols() != H || values.rows() != keys.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "attention shapes");
  }
  const std::size_t dh = H / static_cast<std::size_t>(heads);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = matmul(queries, wq);
  std::vector<Var> contexts;
  Var weight_sum;
  for (int h = 0; h < heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dh;
    Var qh = heads == 1 ? q : slice_cols(q, off, dh);
    Var kh = heads == 1 ? keys : slice_cols(keys, off, dh);
    Var vh = heads == 1 ? values : slice_cols(values, off, dh);
    Var a = softmax_rows(scale(matmul(qh, transpose(kh)), inv));
    contexts.push_back(matmul(a, vh));
    weight_sum = h == 0 ? a : add(weight_sum, a);
  }
  Var ctx = heads == 1 ? contexts[0] : ad::concat_cols(contexts);
  Var weights = heads == 1 ? weight_sum : scale(weight_sum, 1.0 / heads);
  return {matmul(ctx, wo), weights};
}

Var CopyPtrModel::lstm_cell(Graph& g, const LstmWeights& w, Var x_proj, Var& h,
                            Var& c) const {
  const std::size_t n = h.cols();
  Var gates = add(add(x_proj, matmul(h, p(g, w.wh))), p(g, w.b));
  Var i = sigmoid(slice_cols(gates, 0, n));
  Var f = sigmoid(slice_cols(gates, n, n));
  Var u = tanh(slice_cols(gates, 2 * n, n));
  Var o = sigmoid(slice_cols(gates, 3 * n, n));
  c = add(mul(f, c), mul(i, u));
  h = mul(o, tanh(c));
  return h;
}

Var CopyPtrModel::transformer_block(Graph& g, const TransformerLayer& layer,
                                    Var x, Var self_k, Var self_v, Var cross_k,
                                    Var cross_v) const {
  const double pd = config_.dropout;
  const MhaWeights& sa = layer.self_attn;
  Var s = multi_head_attention(x, p(g, sa.wq), self_k, self_v, p(g, sa.wo),
                               config_.heads)
              .out;
  x = layer_norm(add(x, dropout(s, pd)), p(g, layer.ln1_g), p(g, layer.ln1_b));
  if (layer.cross_attn) {
    const MhaWeights& ca = *layer.cross_attn;
    Var c = multi_head_attention(x, p(g, ca.wq), cross_k, cross_v, p(g, ca.wo),
                                 config_.heads)
                .out;
    x = layer_norm(add(x, dropout(c, pd)), p(g, layer.ln3_g), p(g, layer.ln3_b));
  }
  Var ff = relu(add(matmul(x, p(g, layer.ff1_w)), p(g, layer.ff1_b)));
  ff = add(matmul(ff, p(g, layer.ff2_w)), p(g, layer.ff2_b));
  return layer_norm(add(x, dropout(ff, pd)), p(g, layer.ln2_g),
                    p(g, layer.ln2_b));
}

// ---------------------------------------------------------------------------
// Encoder / decoder

EncoderOutput CopyPtrModel::encode(Graph& g,
                                   std::span<const int> source_ids) const {
  if (source_ids.empty()) {
    throw Error(ErrorCode::kEmptyInput, "empty source sequence");
  }
  for (int id : source_ids) {
    if (id < 0 || id >= config_.source_vocab) {
      throw Error(ErrorCode::kShapeMismatch,
                  "source id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  const double pd = config_.dropout;
  const std::size_t n = source_ids.size();
  EncoderOutput enc;
  enc.source_ids.assign(source_ids.begin(), source_ids.end());
  Var x = dropout(embedding(p(g, source_embed_), source_ids), pd);

  if (config_.kind == EncoderKind::kRecurrent) {
    const auto half = static_cast<std::size_t>(config_.hidden / 2);
    for (int l = 0; l < config_.layers; ++l) {
      Var proj_f = matmul(x, p(g, enc_fwd_[l].wx));
      Var proj_b = matmul(x, p(g, enc_bwd_[l].wx));
      std::vector<Var> fwd(n), bwd(n);
      Var h = g.constant(Tensor(1, half));
      Var c = g.constant(Tensor(1, half));
      for (std::size_t t = 0; t < n; ++t) {
        fwd[t] = lstm_cell(g, enc_fwd_[l], slice_rows(proj_f, t, 1), h, c);
      }
      h = g.constant(Tensor(1, half));
      c = g.constant(Tensor(1, half));
      for (std::size_t t = n; t-- > 0;) {
        bwd[t] = lstm_cell(g, enc_bwd_[l], slice_rows(proj_b, t, 1), h, c);
      }
      x = concat_cols({ad::concat_rows(fwd), ad::concat_rows(bwd)});
      if (l + 1 < config_.layers) x = dropout(x, pd);
    }
    enc.states = x;
  } else {
    x = add(matmul(x, p(g, enc_in_)),
            g.constant(sinusoid(n, static_cast<std::size_t>(config_.hidden))));
    x = dropout(x, pd);
    for (const TransformerLayer& layer : enc_layers_) {
      Var k = matmul(x, p(g, layer.self_attn.wk));
      Var v = matmul(x, p(g, layer.self_attn.wv));
      x = transformer_block(g, layer, x, k, v, Var(), Var());
    }
    enc.states = x;
    for (const TransformerLayer& layer : dec_layers_) {
      enc.cross_keys.push_back(matmul(x, p(g, layer.cross_attn->wk)));
      enc.cross_values.push_back(matmul(x, p(g, layer.cross_attn->wv)));
    }
  }
  enc.states_t = transpose(enc.states);
  enc.copy_keys = matmul(enc.states, p(g, copy_attn_.wk));
  enc.copy_values = matmul(enc.states, p(g, copy_attn_.wv));
  return enc;
}

DecoderState CopyPtrModel::initial_state(Graph& g,
                                         const EncoderOutput& enc) const {
  DecoderState s;
  const auto H = static_cast<std::size_t>(config_.hidden);
  if (config_.kind == EncoderKind::kRecurrent) {
    for (int l = 0; l < config_.layers; ++l) {
      s.h.push_back(g.constant(Tensor(1, H)));
      s.c.push_back(g.constant(Tensor(1, H)));
    }
    s.feed = mean_rows(enc.states);
  } else {
    s.self_keys.resize(static_cast<std::size_t>(config_.layers));
    s.self_values.resize(static_cast<std::size_t>(config_.layers));
  }
  return s;
}

Var CopyPtrModel::feed_embedding(Graph& g, const EncoderOutput& enc,
                                 std::optional<Symbol> previous) const {
  if (!previous) {
    const int bos = config_.ontology_vocab;
    return embedding(p(g, ontology_embed_), std::span<const int>(&bos, 1));
  }
  if (previous->is_copy()) {
    if (previous->index < 0 ||
        static_cast<std::size_t>(previous->index) >= enc.length()) {
      throw Error(ErrorCode::kInvalidPreviousSymbol,
                  "copy position " + std::to_string(previous->index) +
                      " outside a source of length " +
                      std::to_string(enc.length()));
    }
    const int id = enc.source_ids[static_cast<std::size_t>(previous->index)];
    return embedding(p(g, source_embed_), std::span<const int>(&id, 1));
  }
  if (previous->index < 0 || previous->index >= config_.ontology_vocab) {
    throw Error(ErrorCode::kInvalidPreviousSymbol,
                "ontology index " + std::to_string(previous->index) +
                    " outside the vocabulary");
  }
  const int id = previous->index;
  return embedding(p(g, ontology_embed_), std::span<const int>(&id, 1));
}

DecoderStep CopyPtrModel::step(Graph& g, const EncoderOutput& enc,
                               DecoderState& state,
                               std::optional<Symbol> previous) const {
  const double pd = config_.dropout;
  Var emb = dropout(feed_embedding(g, enc, previous), pd);
  DecoderStep out;

  if (config_.kind == EncoderKind::kRecurrent) {
    Var in = concat_cols({emb, state.feed});
    for (int l = 0; l < config_.layers; ++l) {
      const auto li = static_cast<std::size_t>(l);
      Var proj = matmul(in, p(g, dec_lstm_[li].wx));
      in = lstm_cell(g, dec_lstm_[li], proj, state.h[li], state.c[li]);
      if (l + 1 < config_.layers) in = dropout(in, pd);
    }
    Var top = in;
    Var scores = matmul(matmul(top, p(g, dec_attn_w_)), enc.states_t);
    Var ctx = matmul(softmax_rows(scores), enc.states);
    Var d = tanh(add(matmul(concat_cols({top, ctx}), p(g, dec_comb_w_)),
                     p(g, dec_comb_b_)));
    state.feed = d;
    out.d = dropout(d, pd);
  } else {
    Var x = add(matmul(emb, p(g, dec_in_)),
                g.constant(sinusoid_row(state.position,
                                        static_cast<std::size_t>(config_.hidden))));
    x = dropout(x, pd);
    for (std::size_t l = 0; l < dec_layers_.size(); ++l) {
      const TransformerLayer& layer = dec_layers_[l];
      state.self_keys[l].push_back(matmul(x, p(g, layer.self_attn.wk)));
      state.self_values[l].push_back(matmul(x, p(g, layer.self_attn.wv)));
      Var k = ad::concat_rows(state.self_keys[l]);
      Var v = ad::concat_rows(state.self_values[l]);
      x = transformer_block(g, layer, x, k, v, enc.cross_keys[l],
                            enc.cross_values[l]);
    }
    ++state.position;
    out.d = x;
  }

  out.g = softmax_rows(add(matmul(out.d, p(g, out_w_)), p(g, out_b_)));
  Var query = add(matmul(out.d, p(g, query_w_)), p(g, query_b_));
  MhaResult copy = multi_head_attention(query, p(g, copy_attn_.wq),
                                        enc.copy_keys, enc.copy_values,
                                        p(g, copy_attn_.wo), config_.heads);
  out.c = copy.weights;
  out.omega = copy.out;
  out.p_copy = sigmoid(
      add(matmul(concat_cols({out.d, out.omega}), p(g, gate_w_)), p(g, gate_b_)));
  out.o = concat_cols(
      {mul(out.g, one_minus(out.p_copy)), mul(out.c, out.p_copy)});
  return out;
}

int CopyPtrModel::output_index(const Symbol& symbol,
                               std::size_t source_length) const {
  if (symbol.is_copy()) {
    if (symbol.index < 0 || static_cast<std::size_t>(symbol.index) >= source_length) {
      throw Error(ErrorCode::kTargetSourceMismatch,
                  "copy position " + std::to_string(symbol.index) +
                      " outside a source of length " +
                      std::to_string(source_length));
    }
    return config_.ontology_vocab + symbol.index;
  }
  if (symbol.index < 0 || symbol.index >= config_.ontology_vocab) {
    throw Error(ErrorCode::kTargetSourceMismatch,
                "ontology index " + std::to_string(symbol.index) +
                    " outside the vocabulary");
  }
  return symbol.index;
}

Symbol CopyPtrModel::symbol_at(int index) const {
  if (index < config_.ontology_vocab) return Symbol::generate(index);
  return Symbol::copy(index - config_.ontology_vocab);
}

Var CopyPtrModel::sequence_loss(Graph& g, std::span<const int> source_ids,
                                std::span<const Symbol> target) const {
  if (target.empty()) {
    throw Error(ErrorCode::kTargetSourceMismatch, "empty target sequence");
  }
  std::vector<int> indices;
  indices.reserve(target.size());
  for (const Symbol& s : target) indices.push_back(output_index(s, source_ids.size()));

  EncoderOutput enc = encode(g, source_ids);
  DecoderState state = initial_state(g, enc);
  std::vector<Var> terms;
  std::optional<Symbol> previous;
  for (std::size_t t = 0; t < target.size(); ++t) {
    DecoderStep s = step(g, enc, state, previous);
    terms.push_back(nll(s.o, static_cast<std::size_t>(indices[t])));
    previous = target[t];
  }
  return scale(sum(ad::concat_cols(terms)), 1.0 / static_cast<double>(target.size()));
}

namespace {

std::size_t argmax(const Tensor& row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

}  // namespace

double CopyPtrModel::teacher_forced_accuracy(
    std::span<const int> source_ids, std::span<const Symbol> target) const {
  if (target.empty()) return 0.0;
  Graph g(Graph::Mode::kEval, 0, false);
  EncoderOutput enc = encode(g, source_ids);
  DecoderState state = initial_state(g, enc);
  std::optional<Symbol> previous;
  std::size_t hits = 0;
  for (const Symbol& gold : target) {
    DecoderStep s = step(g, enc, state, previous);
    const int want = output_index(gold, source_ids.size());
    if (static_cast<int>(argmax(s.o.value())) == want) ++hits;
    previous = gold;
  }
  return static_cast<double>(hits) / static_cast<double>(target.size());
}

void CopyPtrModel::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  std::ofstream cfg(dir / "model.cfg");
  if (!cfg) throw Error(ErrorCode::kIo, "cannot write " + (dir / "model.cfg").string());
  cfg << config_.to_text();
  cfg.close();
  ad::save_checkpoint(params_, dir / "params.bin");
}

CopyPtrModel CopyPtrModel::load(const std::filesystem::path& dir) {
  std::ifstream cfg(dir / "model.cfg");
  if (!cfg) throw Error(ErrorCode::kFileNotFound, (dir / "model.cfg").string());
  std::stringstream text;
  text << cfg.rdbuf();
  ModelConfig config = ModelConfig::from_text(text.str());
  CopyPtrModel model(config, 0);
  ad::load_checkpoint(model.params_, dir / "params.bin");
  return model;
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

int balance_delta(const Symbol& s, int close_index) {
  if (s.is_copy()) return 0;
  return s.index == close_index ? -1 : 1;
}

}  // namespace

bool well_formed(std::span<const Symbol> symbols, int close_index) {
  if (symbols.empty()) return false;
  int balance = 0;
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    if (symbols[k].is_copy() && balance < 1) return false;
    balance += balance_delta(symbols[k], close_index);
    if (balance < 0) return false;
    if (balance == 0 && k + 1 != symbols.size()) return false;
  }
  return balance == 0;
}

Decoded greedy_decode(const CopyPtrModel& model,
                      std::span<const int> source_ids, int max_len) {
  Graph g(Graph::Mode::kEval, 0, false);
  EncoderOutput enc = model.encode(g, source_ids);
  DecoderState state = model.initial_state(g, enc);
  const int close = model.config().close_index;
  Decoded result;
  std::optional<Symbol> previous;
  int balance = 0;
  for (int t = 0; t < max_len; ++t) {
    DecoderStep s = model.step(g, enc, state, previous);
    const Tensor& o = s.o.value();
    const std::size_t best = argmax(o);
    result.log_prob += std::log(o[best]);
    const Symbol sym = model.symbol_at(static_cast<int>(best));
    result.symbols.push_back(sym);
    balance += balance_delta(sym, close);
    if (balance <= 0) break;
    previous = sym;
  }
  result.well_formed = well_formed(result.symbols, close);
  return result;
}

Decoded beam_decode(const CopyPtrModel& model, std::span<const int> source_ids,
                    int beam_width, int max_len) {
  if (beam_width < 1) {
    throw Error(ErrorCode::kInvalidConfig, "beam width must be >= 1");
  }
  struct Hyp {
    EncodedTarget symbols;
    DecoderState state;
    double log_prob = 0.0;
    int balance = 0;
    bool done = false;
    double score() const {
      return symbols.empty() ? 0.0 : log_prob / static_cast<double>(symbols.size());
    }
  };
  Graph g(Graph::Mode::kEval, 0, false);
  EncoderOutput enc = model.encode(g, source_ids);
  const int close = model.config().close_index;
  const auto width = static_cast<std::size_t>(beam_width);

  std::vector<Hyp> beams(1);
  beams[0].state = model.initial_state(g, enc);
  for (int t = 0; t < max_len; ++t) {
    std::vector<Hyp> candidates;
    for (const Hyp& hyp : beams) {
      if (hyp.done) {
        candidates.push_back(hyp);
        continue;
      }
      DecoderState state = hyp.state;
      std::optional<Symbol> previous;
      if (!hyp.symbols.empty()) previous = hyp.symbols.back();
      DecoderStep s = model.step(g, enc, state, previous);
      const Tensor& o = s.o.value();
      std::vector<std::size_t> order(o.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      const std::size_t keep = std::min(width, order.size());
      std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return o[a] > o[b] || (o[a] == o[b] && a < b);
                        });
      for (std::size_t r = 0; r < keep; ++r) {
        Hyp next;
        next.symbols = hyp.symbols;
        const Symbol sym = model.symbol_at(static_cast<int>(order[r]));
        next.symbols.push_back(sym);
        next.state = state;
        next.log_prob = hyp.log_prob + std::log(o[order[r]]);
        next.balance = hyp.balance + balance_delta(sym, close);
        next.done = next.balance <= 0;
        candidates.push_back(std::move(next));
      }
    }
    // Candidates arrive ordered by parent then rank, so a stable sort on
    // the score alone keeps ties deterministic.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hyp& a, const Hyp& b) { return a.score() > b.score(); });
    if (candidates.size() > width) candidates.resize(width);
    beams = std::move(candidates);
    if (std::all_of(beams.begin(), beams.end(),
                    [](const Hyp& h) { return h.done; })) {
      break;
    }
  }
  // Prefer finished hypotheses; beams are already sorted by score.
  const Hyp* best = &beams.front();
  for (const Hyp& h : beams) {
    if (h.done) {
      best = &h;
      break;
    }
  }
  Decoded result;
  result.symbols = best->symbols;
  result.log_prob = best->log_prob;
  result.well_formed = well_formed(result.symbols, close);
  return result;
}

}  // namespace copyptr
