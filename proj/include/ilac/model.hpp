#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ilac/autodiff.hpp"
#include "ilac/scene.hpp"
#include "ilac/tensor.hpp"

namespace ilac {

struct ModelConfig {
  std::size_t d_c = 512;    // image context
  std::size_t d_v = 512;    // node
  std::size_t d_e = 512;    // edge
  std::size_t d_phi = 256;  // attention projection
  std::size_t n_iters = 2;
  std::size_t n_obj_classes = 150;
  std::size_t n_pred_classes = 50;
  std::size_t feat_dim = 4096;
  std::size_t bbox_dim = 4;

  // false: context refinement is skipped and a zero context feeds the edge
  // and node updates ("No-context" ablation).
  bool use_context = true;
  // true: node update reads the context from before this iteration's
  // context update instead of the freshly updated one.
  bool node_uses_previous_context = false;

  // Hidden sizes used for CPU-scale experiments.
  static ModelConfig desk(std::size_t n_obj_classes, std::size_t n_pred_classes, std::size_t feat_dim);

  std::size_t node_input_dim() const { return n_obj_classes + bbox_dim + feat_dim; }
  void validate() const;  // throws SpecError

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Four-gate LSTM weights; each gate matrix is [hidden x (input + hidden)]
// acting on [x; h].
template <class T>
struct LstmSet {
  T input_w, forget_w, cell_w, output_w;
  T input_b, forget_b, cell_b, output_b;
};

template <class T>
struct ParamSet {
  T node_embed;  // [d_v x (n_obj_classes + bbox_dim + feat_dim)]
  T edge_embed;  // [d_e x feat_dim]

  // Image context attention over nodes and over edges, queried by the context.
  T node_attn_proj, node_attn_score;  // [d_phi x (d_v + d_c)], [d_phi]
  T edge_attn_proj, edge_attn_score;  // [d_phi x (d_e + d_c)], [d_phi]
  // Per-node attention over incoming edges, queried by the node itself.
  T incoming_attn_proj, incoming_attn_score;  // [d_phi x (d_e + d_v)], [d_phi]

  LstmSet<T> context_lstm;  // in d_v + d_e,      hidden d_c
  LstmSet<T> edge_lstm;     // in 2 d_v + d_c,    hidden d_e
  LstmSet<T> node_lstm;     // in d_e + d_c,      hidden d_v

  T obj_head_w, obj_head_b;    // [n_obj_classes x d_v], [n_obj_classes]
  T pred_head_w, pred_head_b;  // [(n_pred_classes + 1) x d_e], [n_pred_classes + 1]
};

using ModelParams = ParamSet<Tensor>;
using BoundParams = ParamSet<Var>;

// Declaration-order (name, member) list; checkpoints and optimizers rely on this order.
template <class T>
std::vector<std::pair<std::string, T*>> param_entries(ParamSet<T>& p);
template <class T>
std::vector<std::pair<std::string, const T*>> param_entries(const ParamSet<T>& p);

// Expected shape of every parameter, in declaration order.
std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg);

// Glorot-uniform matrices, zero biases, forget-gate biases 1.0.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
ModelParams zero_params(const ModelConfig& cfg);
void validate_params(const ModelParams& params, const ModelConfig& cfg);  // throws DimensionError

BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad);

// Per-scene model input: node rows [soft_label; bbox; feature] and one
// union-box feature row per ordered pair in edge_index order.
struct GraphInput {
  std::size_t n_objects = 0;
  Tensor node_inputs;    // [N x node_input_dim]
  Tensor edge_features;  // [N(N-1) x feat_dim]
};

using UnionFeatureFn = std::function<std::vector<double>(std::size_t subj, std::size_t obj)>;

// Throws SceneTooSmallError for fewer than two objects and DimensionError
// when a soft label, feature, or union feature has the wrong length.
GraphInput make_graph_input(const SceneInstance& scene, const ModelConfig& cfg, const UnionFeatureFn& union_feature);

struct GraphState {
  std::size_t n_objects = 0;
  std::size_t iteration = 0;
  Var node_h, node_cell;   // [N x d_v]
  Var edge_h, edge_cell;   // [N(N-1) x d_e]
  Var ctx_h, ctx_cell;     // [1 x d_c]
  Var prev_ctx_h;          // context before the latest context update
};

struct LstmState {
  Var h, c;
};

// Batched LSTM cell: each row of `input`, `h`, `c` is an independent step.
LstmState lstm_step(Var input, Var h, Var c, const LstmSet<Var>& weights);

struct Attention {
  Var weights;  // [n]
  Var summary;  // [1 x d_x]
};

// score_i = score . tanh(proj [element_i; query]); weights = softmax(scores);
// summary = sum_i weights_i element_i. elements is [n x d_x], query [1 x d_q].
Attention attend(Var elements, Var query, Var proj, Var score);

// Optional observer for property tests and diagnostics.
struct ForwardTrace {
  std::vector<Tensor> attention_weights;  // one entry per attend call
  std::vector<Tensor> context;            // ctx_h after every iteration
};

GraphState init_graph(const GraphInput& input, const BoundParams& params, const ModelConfig& cfg);
GraphState update_context(const GraphState& state, const BoundParams& params, const ModelConfig& cfg,
                          ForwardTrace* trace = nullptr);
GraphState update_edges(const GraphState& state, const BoundParams& params, const ModelConfig& cfg);
GraphState update_nodes(const GraphState& state, const BoundParams& params, const ModelConfig& cfg,
                        ForwardTrace* trace = nullptr);

struct ForwardResult {
  Var obj_logits;   // [N x n_obj_classes]
  Var pred_logits;  // [N(N-1) x (n_pred_classes + 1)]; column 0 is "no relation"
  GraphState state;
};

ForwardResult forward(const GraphInput& input, const BoundParams& params, const ModelConfig& cfg,
                      ForwardTrace* trace = nullptr);

struct Logits {
  Tensor obj;
  Tensor pred;
};

// Inference without gradient bookkeeping.
Logits predict(const GraphInput& input, const ModelParams& params, const ModelConfig& cfg,
               ForwardTrace* trace = nullptr);

}  // namespace ilac
