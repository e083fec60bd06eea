#include "ilac/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "ilac/errors.hpp"
#include "ilac/evaluation.hpp"

namespace ilac {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw SpecError("learning_rate must be > 0");
  if (batch_size < 1) throw SpecError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw SpecError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw SpecError("adam_eps must be > 0");
  if (!(clip_norm >= 0.0)) throw SpecError("clip_norm must be >= 0");
  if (workers < 1) throw SpecError("workers must be >= 1");
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState s;
  for (const auto& [name, t] : param_entries(params)) {
    s.m.push_back(Tensor::zeros(t->shape()));
    s.v.push_back(Tensor::zeros(t->shape()));
  }
  return s;
}

std::vector<SampledRelation> sample_relations(const SceneInstance& scene, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = scene.n_objects();
  if (n < 2) throw SceneTooSmallError("relation sampling needs at least 2 objects in scene '" + scene.id + "'");
  std::vector<SampledRelation> out;
  std::vector<bool> annotated(edge_count(n), false);
  for (const auto& r : scene.relations) {
    out.push_back({r.subj, r.obj, r.predicate});
    annotated[edge_index(n, r.subj, r.obj)] = true;
  }
  if (out.size() >= k) return out;

  std::vector<std::size_t> free_pairs;
  for (std::size_t e = 0; e < annotated.size(); ++e)
    if (!annotated[e]) free_pairs.push_back(e);
  const std::size_t take = std::min(k - out.size(), free_pairs.size());
  // Partial Fisher-Yates: the first `take` slots become a uniform sample without replacement.
  for (std::size_t q = 0; q < take; ++q) {
    std::uniform_int_distribution<std::size_t> pick(q, free_pairs.size() - 1);
    std::swap(free_pairs[q], free_pairs[pick(rng)]);
    auto [s, o] = edge_pair(n, free_pairs[q]);
    out.push_back({s, o, 0});
  }
  return out;
}

Var compute_loss(Var obj_logits, Var pred_logits, const SceneInstance& scene,
                 std::span<const SampledRelation> relations) {
  const std::size_t n = scene.n_objects();
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = scene.objects[i].label;
  Var loss = cross_entropy_mean(obj_logits, labels);
  if (relations.empty()) return loss;
  std::vector<std::size_t> rows, targets;
  for (const auto& r : relations) {
    rows.push_back(edge_index(n, r.subj, r.obj));
    targets.push_back(r.predicate);
  }
  return add(loss, cross_entropy_mean(gather_rows(pred_logits, std::move(rows)), targets));
}

void adam_update(std::span<Tensor> params, std::span<const Tensor> grads, std::span<const std::string> names,
                 AdamState& state, const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam: parameter, gradient and moment lists differ in length");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].shape() != params[k].shape()) {
      throw DimensionError("adam: gradient for " + names[k] + " has shape " + shape_string(grads[k].shape()));
    }
  }
  state.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::size_t n = params[k].size();
    std::vector<double> p(params[k].data().begin(), params[k].data().end());
    std::vector<double> m(state.m[k].data().begin(), state.m[k].data().end());
    std::vector<double> v(state.v[k].data().begin(), state.v[k].data().end());
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grads[k][i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
    const auto finite = [](const std::vector<double>& xs) {
      return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(p) || !finite(m) || !finite(v)) {
      throw NumericalError("parameter " + names[k] + " became non-finite after the Adam step");
    }
    params[k] = Tensor(params[k].shape(), std::move(p));
    state.m[k] = Tensor(params[k].shape(), std::move(m));
    state.v[k] = Tensor(params[k].shape(), std::move(v));
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
  auto p_entries = param_entries(params);
  auto g_entries = param_entries(grads);
  std::vector<Tensor> p, g;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < p_entries.size(); ++k) {
    p.push_back(*p_entries[k].second);
    g.push_back(*g_entries[k].second);
    names.push_back(p_entries[k].first);
  }
  adam_update(p, g, names, state, cfg);
  for (std::size_t k = 0; k < p_entries.size(); ++k) *p_entries[k].second = std::move(p[k]);
}

SceneGradient scene_gradient(const GraphInput& input, const SceneInstance& scene,
                             std::span<const SampledRelation> relations, const ModelParams& params,
                             const ModelConfig& cfg) {
  Tape tape;
  BoundParams bound = bind_params(tape, params, true);
  ForwardResult r = forward(input, bound, cfg);
  Var loss = compute_loss(r.obj_logits, r.pred_logits, scene, relations);
  Gradients g = tape.backward(loss);
  SceneGradient out;
  out.loss = loss.value().item();
  auto vars = param_entries(bound);
  auto dst = param_entries(out.grads);
  for (std::size_t k = 0; k < vars.size(); ++k) {
    try {
      *dst[k].second = g.of(*vars[k].second);
    } catch (const NumericalError&) {
      throw NumericalError("gradient of " + vars[k].first + " is not finite in scene '" + scene.id + "'");
    }
  }
  return out;
}

FiniteDiffReport model_gradient_check(const GraphInput& input, const SceneInstance& scene,
                                      std::span<const SampledRelation> relations, const ModelParams& params,
                                      const ModelConfig& cfg, double h, double tol, FdStencil stencil) {
  std::vector<NamedTensor> named;
  for (const auto& [name, t] : param_entries(params)) named.push_back({name, *t});
  auto objective = [&](Tape&, std::span<const Var> vars) {
    BoundParams bound;
    auto slots = param_entries(bound);
    for (std::size_t k = 0; k < slots.size(); ++k) *slots[k].second = vars[k];
    ForwardResult r = forward(input, bound, cfg);
    return compute_loss(r.obj_logits, r.pred_logits, scene, relations);
  };
  return finite_diff_check(objective, named, h, tol, stencil);
}

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7a11u};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(const Dataset& train_data, const Dataset& val_data, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, std::optional<TrainState> resume, const EpochCallback& on_epoch) {
  model_cfg.validate();
  cfg.validate();
  if (train_data.empty()) throw InputError("training corpus is empty");

  TrainState state;
  if (resume) {
    validate_params(resume->params, model_cfg);
    state = std::move(*resume);
    if (state.adam.m.empty()) state.adam = AdamState::zeros_like(state.params);
  } else {
    state.params = init_params(model_cfg, cfg.seed);
    state.adam = AdamState::zeros_like(state.params);
  }

  TrainResult result;
  double best_score = -1.0;
  const std::size_t kPredicatesK[] = {50, 100};
  const std::size_t n_params = param_entries(state.params).size();

  for (std::size_t epoch = state.epochs_done; epoch < state.epochs_done + cfg.epochs; ++epoch) {
    auto rng = epoch_rng(cfg.seed, epoch);
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::size_t count = end - begin;
      std::vector<std::vector<SampledRelation>> relations(count);
      for (std::size_t q = 0; q < count; ++q) {
        relations[q] = sample_relations(train_data.scenes[order[begin + q]], cfg.predicates_per_image, rng);
      }
      std::vector<SceneGradient> grads(count);
      auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t q = first; q < count; q += stride) {
          const std::size_t s = order[begin + q];
          grads[q] = scene_gradient(train_data.inputs[s], train_data.scenes[s], relations[q], state.params, model_cfg);
        }
      };
      const std::size_t workers = std::min(cfg.workers, count);
      if (workers <= 1) {
        work(0, 1);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
      }

      // Ordered reduction: identical results for any worker count.
      ModelParams mean_grad;
      auto mean_entries = param_entries(mean_grad);
      for (std::size_t k = 0; k < n_params; ++k) {
        const Tensor& first = *param_entries(grads[0].grads)[k].second;
        std::vector<double> acc(first.size(), 0.0);
        for (std::size_t q = 0; q < count; ++q) {
          const Tensor& g = *param_entries(grads[q].grads)[k].second;
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
        for (double& a : acc) a /= static_cast<double>(count);
        *mean_entries[k].second = Tensor(first.shape(), std::move(acc));
      }
      for (std::size_t q = 0; q < count; ++q) loss_sum += grads[q].loss;

      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& [name, g] : mean_entries)
          for (double v : g->data()) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          const double f = cfg.clip_norm / norm;
          for (auto& [name, g] : mean_entries) {
            std::vector<double> scaled(g->data().begin(), g->data().end());
            for (double& v : scaled) v *= f;
            *g = Tensor(g->shape(), std::move(scaled));
          }
        }
      }

      try {
        adam_step(state.params, mean_grad, state.adam, cfg);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": " + e.what());
      }
      ++result.optimizer_steps;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_data.size());
    if (!std::isfinite(m.train_loss)) {
      throw NumericalError("training loss is not finite after epoch " + std::to_string(epoch));
    }
    double score = 0.0;
    if (!val_data.empty()) {
      EvalReport r = evaluate_model(val_data, state.params, model_cfg, EvalMode::kSgCls, kPredicatesK, cfg.workers);
      m.val_obj_acc = r.object_accuracy.value_or(0.0);
      m.val_r50 = r.r_at[50];
      m.val_r100 = r.r_at[100];
      score = m.val_obj_acc + 0.5 * (m.val_r50 + m.val_r100);
    }
    if (val_data.empty() || score > best_score || result.log.empty()) {
      best_score = score;
      result.best = state.params;
      result.best_epoch = epoch;
    }
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  if (cfg.epochs == 0) result.best = state.params;
  state.epochs_done += cfg.epochs;
  result.last = std::move(state);
  return result;
}

double dataset_loss(const Dataset& data, const ModelParams& params, const ModelConfig& model_cfg,
                    std::size_t predicates_per_image, std::uint64_t seed) {
  if (data.empty()) throw InputError("dataset is empty");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto rel = sample_relations(data.scenes[s], predicates_per_image, rng);
    Tape tape;
    BoundParams bound = bind_params(tape, params, false);
    ForwardResult r = forward(data.inputs[s], bound, model_cfg);
    total += compute_loss(r.obj_logits, r.pred_logits, data.scenes[s], rel).value().item();
  }
  return total / static_cast<double>(data.size());
}

}  // namespace ilac
