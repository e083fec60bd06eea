#include "ilac/model.hpp"

#include <cmath>
#include <random>

#include "ilac/errors.hpp"

namespace ilac {

ModelConfig ModelConfig::desk(std::size_t n_obj_classes, std::size_t n_pred_classes, std::size_t feat_dim) {
  ModelConfig cfg;
  cfg.d_c = cfg.d_v = cfg.d_e = 64;
  cfg.d_phi = 32;
  cfg.n_obj_classes = n_obj_classes;
  cfg.n_pred_classes = n_pred_classes;
  cfg.feat_dim = feat_dim;
  return cfg;
}

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> dims[] = {
      {"d_c", d_c}, {"d_v", d_v}, {"d_e", d_e}, {"d_phi", d_phi}, {"n_iters", n_iters},
      {"n_obj_classes", n_obj_classes}, {"n_pred_classes", n_pred_classes}, {"feat_dim", feat_dim}};
  for (const auto& [name, value] : dims) {
    if (value < 1) throw SpecError(std::string(name) + " must be >= 1");
  }
  if (bbox_dim != 4) throw SpecError("bbox_dim must be 4 ([x1, y1, x2, y2])");
}

// ---- parameter bookkeeping --------------------------------------------------

namespace {

template <class T, class Entry>
void lstm_entries(const std::string& prefix, LstmSet<T>& l, std::vector<Entry>& out) {
  out.emplace_back(prefix + ".input_w", &l.input_w);
  out.emplace_back(prefix + ".forget_w", &l.forget_w);
  out.emplace_back(prefix + ".cell_w", &l.cell_w);
  out.emplace_back(prefix + ".output_w", &l.output_w);
  out.emplace_back(prefix + ".input_b", &l.input_b);
  out.emplace_back(prefix + ".forget_b", &l.forget_b);
  out.emplace_back(prefix + ".cell_b", &l.cell_b);
  out.emplace_back(prefix + ".output_b", &l.output_b);
}

template <class T, class Entry>
std::vector<Entry> entries_impl(ParamSet<T>& p) {
  std::vector<Entry> out;
  out.emplace_back("node_embed", &p.node_embed);
  out.emplace_back("edge_embed", &p.edge_embed);
  out.emplace_back("node_attn_proj", &p.node_attn_proj);
  out.emplace_back("node_attn_score", &p.node_attn_score);
  out.emplace_back("edge_attn_proj", &p.edge_attn_proj);
  out.emplace_back("edge_attn_score", &p.edge_attn_score);
  out.emplace_back("incoming_attn_proj", &p.incoming_attn_proj);
  out.emplace_back("incoming_attn_score", &p.incoming_attn_score);
  lstm_entries("context_lstm", p.context_lstm, out);
  lstm_entries("edge_lstm", p.edge_lstm, out);
  lstm_entries("node_lstm", p.node_lstm, out);
  out.emplace_back("obj_head_w", &p.obj_head_w);
  out.emplace_back("obj_head_b", &p.obj_head_b);
  out.emplace_back("pred_head_w", &p.pred_head_w);
  out.emplace_back("pred_head_b", &p.pred_head_b);
  return out;
}

void lstm_shapes(const std::string& prefix, std::size_t in, std::size_t hidden,
                 std::vector<std::pair<std::string, Shape>>& out) {
  for (const char* gate : {".input_w", ".forget_w", ".cell_w", ".output_w"}) out.emplace_back(prefix + gate, Shape{hidden, in + hidden});
  for (const char* gate : {".input_b", ".forget_b", ".cell_b", ".output_b"}) out.emplace_back(prefix + gate, Shape{hidden});
}

}  // namespace

template <class T>
std::vector<std::pair<std::string, T*>> param_entries(ParamSet<T>& p) {
  return entries_impl<T, std::pair<std::string, T*>>(p);
}

template <class T>
std::vector<std::pair<std::string, const T*>> param_entries(const ParamSet<T>& p) {
  auto mutable_entries = param_entries(const_cast<ParamSet<T>&>(p));
  std::vector<std::pair<std::string, const T*>> out;
  for (auto& [name, ptr] : mutable_entries) out.emplace_back(std::move(name), ptr);
  return out;
}

template std::vector<std::pair<std::string, Tensor*>> param_entries(ParamSet<Tensor>&);
template std::vector<std::pair<std::string, const Tensor*>> param_entries(const ParamSet<Tensor>&);
template std::vector<std::pair<std::string, Var*>> param_entries(ParamSet<Var>&);
template std::vector<std::pair<std::string, const Var*>> param_entries(const ParamSet<Var>&);

std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("node_embed", Shape{cfg.d_v, cfg.node_input_dim()});
  out.emplace_back("edge_embed", Shape{cfg.d_e, cfg.feat_dim});
  out.emplace_back("node_attn_proj", Shape{cfg.d_phi, cfg.d_v + cfg.d_c});
  out.emplace_back("node_attn_score", Shape{cfg.d_phi});
  out.emplace_back("edge_attn_proj", Shape{cfg.d_phi, cfg.d_e + cfg.d_c});
  out.emplace_back("edge_attn_score", Shape{cfg.d_phi});
  out.emplace_back("incoming_attn_proj", Shape{cfg.d_phi, cfg.d_e + cfg.d_v});
  out.emplace_back("incoming_attn_score", Shape{cfg.d_phi});
  lstm_shapes("context_lstm", cfg.d_v + cfg.d_e, cfg.d_c, out);
  lstm_shapes("edge_lstm", 2 * cfg.d_v + cfg.d_c, cfg.d_e, out);
  lstm_shapes("node_lstm", cfg.d_e + cfg.d_c, cfg.d_v, out);
  out.emplace_back("obj_head_w", Shape{cfg.n_obj_classes, cfg.d_v});
  out.emplace_back("obj_head_b", Shape{cfg.n_obj_classes});
  out.emplace_back("pred_head_w", Shape{cfg.n_pred_classes + 1, cfg.d_e});
  out.emplace_back("pred_head_b", Shape{cfg.n_pred_classes + 1});
  return out;
}

std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [name, shape] : param_shapes(cfg)) n += shape_size(shape);
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams params;
  auto shapes = param_shapes(cfg);
  auto entries = param_entries(params);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& [name, shape] = shapes[k];
    // Attention score vectors act as [1 x d_phi] matrices.
    if (shape.size() == 2 || name.ends_with("_score")) {
      const double fan_out = shape.size() == 2 ? static_cast<double>(shape[0]) : 1.0;
      const double fan_in = static_cast<double>(shape.back());
      const double s = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-s, s);
      std::vector<double> data(shape_size(shape));
      for (double& v : data) v = dist(rng);
      *entries[k].second = Tensor(shape, std::move(data));
    } else {
      const double fill = name.ends_with(".forget_b") ? 1.0 : 0.0;
      *entries[k].second = Tensor::filled(shape, fill);
    }
  }
  return params;
}

ModelParams zero_params(const ModelConfig& cfg) {
  ModelParams params;
  auto shapes = param_shapes(cfg);
  auto entries = param_entries(params);
  for (std::size_t k = 0; k < entries.size(); ++k) *entries[k].second = Tensor::zeros(shapes[k].second);
  return params;
}

void validate_params(const ModelParams& params, const ModelConfig& cfg) {
  auto shapes = param_shapes(cfg);
  auto entries = param_entries(params);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].second->shape() != shapes[k].second) {
      throw DimensionError("parameter " + entries[k].first + " has shape " + shape_string(entries[k].second->shape()) +
                           ", expected " + shape_string(shapes[k].second));
    }
  }
}

BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams bound;
  auto src = param_entries(params);
  auto dst = param_entries(bound);
  for (std::size_t k = 0; k < src.size(); ++k) *dst[k].second = tape.leaf(src[k].second->with_requires_grad(requires_grad));
  return bound;
}

// ---- inputs -------------------------------------------------------------------

GraphInput make_graph_input(const SceneInstance& scene, const ModelConfig& cfg, const UnionFeatureFn& union_feature) {
  const std::size_t n = scene.n_objects();
  if (n < 2) {
    throw SceneTooSmallError("scene '" + scene.id + "' has " + std::to_string(n) + " objects; at least 2 are needed");
  }
  const std::size_t width = cfg.node_input_dim();
  std::vector<double> nodes;
  nodes.reserve(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = scene.objects[i];
    if (o.soft_label.size() != cfg.n_obj_classes) {
      throw DimensionError("object " + std::to_string(i) + " soft label has length " +
                           std::to_string(o.soft_label.size()) + ", expected " + std::to_string(cfg.n_obj_classes));
    }
    if (o.feature.size() != cfg.feat_dim) {
      throw DimensionError("object " + std::to_string(i) + " feature has length " + std::to_string(o.feature.size()) +
                           ", expected " + std::to_string(cfg.feat_dim));
    }
    nodes.insert(nodes.end(), o.soft_label.begin(), o.soft_label.end());
    for (double c : o.bbox.coords()) nodes.push_back(c);
    nodes.insert(nodes.end(), o.feature.begin(), o.feature.end());
  }
  const std::size_t n_edges = edge_count(n);
  std::vector<double> edges;
  edges.reserve(n_edges * cfg.feat_dim);
  for (std::size_t e = 0; e < n_edges; ++e) {
    auto [i, j] = edge_pair(n, e);
    auto f = union_feature(i, j);
    if (f.size() != cfg.feat_dim) {
      throw DimensionError("union feature for (" + std::to_string(i) + ", " + std::to_string(j) + ") has length " +
                           std::to_string(f.size()) + ", expected " + std::to_string(cfg.feat_dim));
    }
    edges.insert(edges.end(), f.begin(), f.end());
  }
  return GraphInput{n, Tensor({n, width}, std::move(nodes)), Tensor({n_edges, cfg.feat_dim}, std::move(edges))};
}

// ---- building blocks ------------------------------------------------------------

LstmState lstm_step(Var input, Var h, Var c, const LstmSet<Var>& w) {
  const std::size_t hidden = w.input_w.shape()[0];
  if (h.shape().size() != 2 || h.shape()[1] != hidden || c.shape() != h.shape()) {
    throw DimensionError("lstm_step: state " + shape_string(h.shape()) + "/" + shape_string(c.shape()) +
                         " does not match hidden size " + std::to_string(hidden));
  }
  if (input.shape().size() != 2 || input.shape()[0] != h.shape()[0]) {
    throw DimensionError("lstm_step: input " + shape_string(input.shape()) + " does not match state " +
                         shape_string(h.shape()));
  }
  Var xh = concat({input, h}, 1);
  Var i = sigmoid(linear(xh, w.input_w, w.input_b));
  Var f = sigmoid(linear(xh, w.forget_w, w.forget_b));
  Var g = tanh(linear(xh, w.cell_w, w.cell_b));
  Var o = sigmoid(linear(xh, w.output_w, w.output_b));
  Var c_next = add(mul(f, c), mul(i, g));
  Var h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

Attention attend(Var elements, Var query, Var proj, Var score) {
  const Shape& es = elements.shape();
  if (es.size() != 2) throw DimensionError("attend: elements must be a matrix, got " + shape_string(es));
  const std::size_t n = es[0];
  if (n == 0) throw DomainError("attend over zero elements");
  if (query.shape().size() == 1) query = reshape(query, {1, query.shape()[0]});
  std::vector<std::size_t> rep(n, 0);
  Var paired = concat({elements, gather_rows(query, std::move(rep))}, 1);
  Var hidden = tanh(linear(paired, proj));
  const std::size_t d_phi = score.shape()[0];
  Var scores = reshape(linear(hidden, reshape(score, {1, d_phi})), {n});
  Var weights = softmax(scores);
  Var summary = matmul(reshape(weights, {1, n}), elements);
  return {weights, summary};
}

// ---- graph updates ---------------------------------------------------------------

GraphState init_graph(const GraphInput& input, const BoundParams& params, const ModelConfig& cfg) {
  if (input.n_objects < 2) throw SceneTooSmallError("graph needs at least 2 objects");
  Tape& tape = *params.node_embed.tape;
  const std::size_t n = input.n_objects;
  const std::size_t e = edge_count(n);
  if (input.node_inputs.shape() != Shape{n, cfg.node_input_dim()} || input.edge_features.shape() != Shape{e, cfg.feat_dim}) {
    throw DimensionError("graph input " + shape_string(input.node_inputs.shape()) + " / " +
                         shape_string(input.edge_features.shape()) + " does not match the model configuration");
  }
  GraphState s;
  s.n_objects = n;
  s.node_h = linear(tape.constant(input.node_inputs), params.node_embed);
  s.edge_h = linear(tape.constant(input.edge_features), params.edge_embed);
  s.node_cell = tape.constant(Tensor::zeros({n, cfg.d_v}));
  s.edge_cell = tape.constant(Tensor::zeros({e, cfg.d_e}));
  s.ctx_h = tape.constant(Tensor::zeros({1, cfg.d_c}));
  s.ctx_cell = s.ctx_h;
  s.prev_ctx_h = s.ctx_h;
  return s;
}

GraphState update_context(const GraphState& state, const BoundParams& params, const ModelConfig& cfg,
                          ForwardTrace* trace) {
  (void)cfg;
  Attention over_nodes = attend(state.node_h, state.ctx_h, params.node_attn_proj, params.node_attn_score);
  Attention over_edges = attend(state.edge_h, state.ctx_h, params.edge_attn_proj, params.edge_attn_score);
  if (trace) {
    trace->attention_weights.push_back(over_nodes.weights.value());
    trace->attention_weights.push_back(over_edges.weights.value());
  }
  Var input = concat({over_nodes.summary, over_edges.summary}, 1);
  LstmState next = lstm_step(input, state.ctx_h, state.ctx_cell, params.context_lstm);
  GraphState s = state;
  s.prev_ctx_h = state.ctx_h;
  s.ctx_h = next.h;
  s.ctx_cell = next.c;
  return s;
}

GraphState update_edges(const GraphState& state, const BoundParams& params, const ModelConfig& cfg) {
  (void)cfg;
  const std::size_t n = state.n_objects;
  const std::size_t e = edge_count(n);
  std::vector<std::size_t> subj(e), obj(e);
  for (std::size_t k = 0; k < e; ++k) std::tie(subj[k], obj[k]) = edge_pair(n, k);
  Var input = concat({gather_rows(state.node_h, std::move(subj)), gather_rows(state.node_h, std::move(obj)),
                      gather_rows(state.ctx_h, std::vector<std::size_t>(e, 0))},
                     1);
  LstmState next = lstm_step(input, state.edge_h, state.edge_cell, params.edge_lstm);
  GraphState s = state;
  s.edge_h = next.h;
  s.edge_cell = next.c;
  return s;
}

GraphState update_nodes(const GraphState& state, const BoundParams& params, const ModelConfig& cfg,
                        ForwardTrace* trace) {
  const std::size_t n = state.n_objects;
  std::vector<Var> incoming;
  incoming.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> edges;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) edges.push_back(edge_index(n, j, i));
    Var query = gather_rows(state.node_h, {i});
    Attention a = attend(gather_rows(state.edge_h, std::move(edges)), query, params.incoming_attn_proj,
                         params.incoming_attn_score);
    if (trace) trace->attention_weights.push_back(a.weights.value());
    incoming.push_back(a.summary);
  }
  Var ctx = cfg.node_uses_previous_context ? state.prev_ctx_h : state.ctx_h;
  Var input = concat({concat(incoming, 0), gather_rows(ctx, std::vector<std::size_t>(n, 0))}, 1);
  LstmState next = lstm_step(input, state.node_h, state.node_cell, params.node_lstm);
  GraphState s = state;
  s.node_h = next.h;
  s.node_cell = next.c;
  s.iteration = state.iteration + 1;
  return s;
}

ForwardResult forward(const GraphInput& input, const BoundParams& params, const ModelConfig& cfg,
                      ForwardTrace* trace) {
  cfg.validate();
  GraphState s = init_graph(input, params, cfg);
  for (std::size_t it = 0; it < cfg.n_iters; ++it) {
    if (cfg.use_context) {
      s = update_context(s, params, cfg, trace);
    } else {
      s.prev_ctx_h = s.ctx_h;
    }
    s = update_edges(s, params, cfg);
    s = update_nodes(s, params, cfg, trace);
    if (trace) trace->context.push_back(s.ctx_h.value());
  }
  ForwardResult out;
  out.obj_logits = linear(s.node_h, params.obj_head_w, params.obj_head_b);
  out.pred_logits = linear(s.edge_h, params.pred_head_w, params.pred_head_b);
  out.state = s;
  return out;
}

Logits predict(const GraphInput& input, const ModelParams& params, const ModelConfig& cfg, ForwardTrace* trace) {
  Tape tape;
  BoundParams bound = bind_params(tape, params, false);
  ForwardResult r = forward(input, bound, cfg, trace);
  return {r.obj_logits.value(), r.pred_logits.value()};
}

}  // namespace ilac
