#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splitlab/rng.hpp"
#include "splitlab/tape.hpp"
#include "splitlab/tensor.hpp"

namespace splitlab {

struct ModelConfig {
  std::size_t vocab_size = 64;
  std::size_t hidden_dim = 32;
  std::size_t num_blocks = 6;
  std::size_t split_point = 2;  // Q1, client-side block count
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 64;
  std::size_t max_seq_len = 16;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t head_dim() const { return hidden_dim / num_heads; }
};

enum class LayerKind {
  RmsNorm1,
  QueryProj,
  KeyProj,
  ValueProj,
  OutputProj,
  RmsNorm2,
  UpProj,
  GateProj,
  Activation,
  DownProj,
};

constexpr LayerKind kAllLayerKinds[] = {
    LayerKind::RmsNorm1, LayerKind::QueryProj,  LayerKind::KeyProj,
    LayerKind::ValueProj, LayerKind::OutputProj, LayerKind::RmsNorm2,
    LayerKind::UpProj,   LayerKind::GateProj,   LayerKind::Activation,
    LayerKind::DownProj};

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerRef {
  std::size_t block = 0;
  LayerKind kind = LayerKind::RmsNorm1;

  bool operator==(const LayerRef& o) const {
    return block == o.block && kind == o.kind;
  }
  std::string name() const;
};

struct Block {
  Tensor norm1_gain;  // D
  Tensor wq, wk, wv, wo;  // D x D
  Tensor norm2_gain;  // D
  Tensor w_up, w_gate;  // D x ffn
  Tensor w_down;  // ffn x D
};

struct SplitModel {
  ModelConfig config;
  Tensor embedding;      // V x D
  Tensor pos_embedding;  // max_seq_len x D
  Tensor output_proj;    // D x V
  std::vector<Block> blocks;
  std::optional<LayerRef> bypassed;

  std::size_t client_block_count() const { return config.split_point; }
};

// Enumerates every trainable tensor with a stable name; order defines the
// checkpoint layout and the training update order.
std::vector<std::pair<std::string, Tensor*>> param_refs(SplitModel& model);
std::vector<std::pair<std::string, const Tensor*>> param_refs(
    const SplitModel& model);

// Pure row selection: row j of the result is row x[j] of the table.
Tensor embed(const std::vector<int>& x, const Tensor& table);
// Token embedding plus learned position embedding, the F_C input h_0.
Tensor input_embedding(const SplitModel& model, const std::vector<int>& x);

// Untraced forward passes.
Tensor client_forward(const SplitModel& model, const Tensor& h0);
Tensor server_forward(const SplitModel& model, const Tensor& h);
Tensor full_forward(const SplitModel& model, const std::vector<int>& x);
int greedy_next_token(const Tensor& logits);

// Traced forward passes. Parameters enter the tape as constant leaves per
// call; `h0` may be any tape value.
struct BlockValues {
  Value norm1_gain, wq, wk, wv, wo, norm2_gain, w_up, w_gate, w_down;
};
struct ModelValues {
  Value embedding, pos_embedding, output_proj;
  std::vector<BlockValues> blocks;
};
ModelValues lift_model(Tape& tape, const SplitModel& model, bool params_grad);
Value block_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                    std::size_t block_idx, Value h);
Value client_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                     Value h0);
Value server_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                     Value h);

// Exactly one sub-layer's map applied at its operating shape.
Tensor layer_forward(const SplitModel& model, const LayerRef& layer,
                     const Tensor& z);
Value layer_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                    const LayerRef& layer, Value z);
// The input tensor that sub-layer sees when the network runs on h0.
Tensor layer_input(const SplitModel& model, const LayerRef& layer,
                   const Tensor& h0);
std::vector<LayerRef> client_layers(const SplitModel& model);

// Structurally identical model with the chosen client-side layer acting as
// identity (rectangular FFN projections: the FFN branch contributes zero).
SplitModel bypass(const SplitModel& model, const LayerRef& layer);

SplitModel init_model(const ModelConfig& config);

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool converged = false;
};
TrainReport toy_train(SplitModel& model, const std::vector<std::vector<int>>& corpus,
                      std::size_t steps, double lr = 1e-3);

void save_checkpoint(const SplitModel& model, const std::string& path,
                     bool compact32 = false);
SplitModel load_checkpoint(const std::string& path);

}  // namespace splitlab
