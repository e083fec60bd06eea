#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ilac/autodiff.hpp"
#include "ilac/corpus.hpp"
#include "ilac/model.hpp"

namespace ilac {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 8;
  std::size_t epochs = 15;
  std::size_t predicates_per_image = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double clip_norm = 0.0;  // global-norm clipping threshold; 0 disables
  std::size_t workers = 1;

  void validate() const;  // throws SpecError

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
  std::vector<Tensor> m, v;  // parameter declaration order
  std::uint64_t t = 0;

  static AdamState zeros_like(const ModelParams& params);
};

struct SampledRelation {
  std::size_t subj = 0;
  std::size_t obj = 0;
  std::size_t predicate = 0;  // 0 = background

  friend bool operator==(const SampledRelation&, const SampledRelation&) = default;
};

// Every annotated relation, then uniformly drawn unannotated ordered pairs
// labelled background until k slots are filled or no such pair is left.
// Annotations are never dropped, even beyond k.
std::vector<SampledRelation> sample_relations(const SceneInstance& scene, std::size_t k, std::mt19937_64& rng);

// Mean object cross entropy + mean cross entropy over the sampled relation slots.
Var compute_loss(Var obj_logits, Var pred_logits, const SceneInstance& scene,
                 std::span<const SampledRelation> relations);

// Bias-corrected Adam on parallel parameter/gradient lists. Throws
// NumericalError naming the first parameter whose gradient is not finite.
void adam_update(std::span<Tensor> params, std::span<const Tensor> grads, std::span<const std::string> names,
                 AdamState& state, const TrainConfig& cfg);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg);

// Loss and parameter gradients for one scene.
struct SceneGradient {
  double loss = 0.0;
  ModelParams grads;
};
SceneGradient scene_gradient(const GraphInput& input, const SceneInstance& scene,
                             std::span<const SampledRelation> relations, const ModelParams& params,
                             const ModelConfig& cfg);

// Central-difference check of every parameter tensor of forward + loss.
FiniteDiffReport model_gradient_check(const GraphInput& input, const SceneInstance& scene,
                                      std::span<const SampledRelation> relations, const ModelParams& params,
                                      const ModelConfig& cfg, double h = 1e-5, double tol = 1e-4,
                                      FdStencil stencil = FdStencil::kThreePoint);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_obj_acc = 0.0;
  double val_r50 = 0.0;
  double val_r100 = 0.0;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::size_t epochs_done = 0;
};

struct TrainResult {
  ModelParams best;      // selected by validation object accuracy + mean SGCls recall
  std::size_t best_epoch = 0;
  TrainState last;       // for resuming
  std::vector<EpochMetrics> log;
  std::size_t optimizer_steps = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Runs cfg.epochs epochs of shuffled mini-batches; a batch gradient is the
// mean of per-scene gradients, reduced in scene order so the result does not
// depend on the worker count. Throws InputError for an empty corpus and
// NumericalError (with epoch/batch) on divergence.
TrainResult train(const Dataset& train_data, const Dataset& val_data, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, std::optional<TrainState> resume = std::nullopt,
                  const EpochCallback& on_epoch = {});

// Mean compute_loss over a dataset with a fixed relation sample per scene (seeded).
double dataset_loss(const Dataset& data, const ModelParams& params, const ModelConfig& model_cfg,
                    std::size_t predicates_per_image, std::uint64_t seed);

}  // namespace ilac
