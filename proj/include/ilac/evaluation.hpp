#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ilac/corpus.hpp"
#include "ilac/model.hpp"
#include "ilac/scene.hpp"
#include "ilac/tensor.hpp"

namespace ilac {

enum class EvalMode { kPredCls, kSgCls };

std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& text);  // throws InputError

// Scored (subject, predicate, object) triple. Labels are the ground-truth
// labels in PredCls and the predicted labels in SGCls.
struct PhrasePrediction {
  std::size_t subj = 0;
  std::size_t obj = 0;
  std::size_t predicate = 1;
  std::size_t subj_label = 0;
  std::size_t obj_label = 0;
  double score = 0.0;
};

// Descending score; ties by (subj, obj, predicate) ascending.
bool phrase_before(const PhrasePrediction& a, const PhrasePrediction& b);

// obj_probs: [N x n_obj_classes] label distributions; pred_probs:
// [N(N-1) x (n_pred_classes + 1)] with column 0 the background class, which
// is never emitted. Every pair may emit several predicates.
std::vector<PhrasePrediction> predict_phrases_from_probabilities(const Tensor& obj_probs, const Tensor& pred_probs,
                                                                 const SceneInstance& scene, EvalMode mode,
                                                                 std::size_t k);

// Softmax of both logit sets, then predict_phrases_from_probabilities. Throws InputError for k < 1.
std::vector<PhrasePrediction> predict_phrases(const Tensor& obj_logits, const Tensor& pred_logits,
                                              const SceneInstance& scene, EvalMode mode, std::size_t k);

// Fraction of ground-truth triples hit by the first k predictions; each
// triple consumes at most one prediction and needs matching labels. Returns
// nullopt for a scene without annotations.
std::optional<double> recall_at_k(std::span<const PhrasePrediction> predictions, const SceneInstance& scene,
                                  std::size_t k);

// Argmax (lowest index on ties) against ground truth.
double object_accuracy(const Tensor& obj_logits, const SceneInstance& scene);
std::size_t argmax_row(const Tensor& m, std::size_t row);

struct EvalReport {
  EvalMode mode = EvalMode::kPredCls;
  std::map<std::size_t, double> r_at;
  std::optional<double> object_accuracy;  // SGCls only
  std::size_t scenes_scored = 0;   // scenes contributing to recall
  std::size_t scenes_skipped = 0;  // scenes without annotated relations
};

// Per-scene probabilities handed to the aggregator.
struct SceneBeliefs {
  Tensor obj_probs;
  Tensor pred_probs;
};

// Macro-averages recall over scenes with annotations and micro-averages
// object accuracy over all objects.
EvalReport evaluate_beliefs(std::span<const SceneInstance> scenes, std::span<const SceneBeliefs> beliefs,
                            EvalMode mode, std::span<const std::size_t> ks);

// Runs the model on every scene of the dataset.
std::vector<SceneBeliefs> model_beliefs(const Dataset& data, const ModelParams& params, const ModelConfig& cfg,
                                        std::size_t workers = 1);
EvalReport evaluate_model(const Dataset& data, const ModelParams& params, const ModelConfig& cfg, EvalMode mode,
                          std::span<const std::size_t> ks, std::size_t workers = 1);

// Empirical P(predicate | subject class, object class) with add-one
// smoothing over the non-background predicates.
class FreqBaseline {
 public:
  static FreqBaseline fit(std::span<const SceneInstance> train, std::size_t n_obj_classes, std::size_t n_pred_classes);

  // Length n_pred_classes + 1; entry 0 (background) is 0.
  std::vector<double> distribution(std::size_t subj_label, std::size_t obj_label) const;
  std::size_t n_obj_classes() const { return n_obj_classes_; }
  std::size_t n_pred_classes() const { return n_pred_classes_; }

  // Object beliefs come from the isolated detector's soft labels; predicate
  // beliefs from the table keyed by ground-truth (PredCls) or argmax
  // soft-label (SGCls) classes.
  SceneBeliefs beliefs(const SceneInstance& scene, EvalMode mode) const;

 private:
  std::size_t n_obj_classes_ = 0, n_pred_classes_ = 0;
  std::vector<std::uint64_t> counts_;  // [subj x obj x (n_pred_classes + 1)]
};

// Accuracy of argmax(soft_label) against ground truth over all objects.
double detector_accuracy(std::span<const SceneInstance> scenes);

}  // namespace ilac
