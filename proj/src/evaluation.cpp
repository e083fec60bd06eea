#include "ilac/evaluation.hpp"

#include <algorithm>
#include <thread>

#include "ilac/errors.hpp"

namespace ilac {

std::string to_string(EvalMode mode) { return mode == EvalMode::kPredCls ? "predcls" : "sgcls"; }

EvalMode parse_eval_mode(const std::string& text) {
  if (text == "predcls") return EvalMode::kPredCls;
  if (text == "sgcls") return EvalMode::kSgCls;
  throw InputError("unknown evaluation mode '" + text + "' (expected predcls or sgcls)");
}

bool phrase_before(const PhrasePrediction& a, const PhrasePrediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.subj != b.subj) return a.subj < b.subj;
  if (a.obj != b.obj) return a.obj < b.obj;
  return a.predicate < b.predicate;
}

std::size_t argmax_row(const Tensor& m, std::size_t row) {
  const std::size_t n = m.cols();
  auto r = m.data().subspan(row * n, n);
  return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

std::vector<PhrasePrediction> predict_phrases_from_probabilities(const Tensor& obj_probs, const Tensor& pred_probs,
                                                                 const SceneInstance& scene, EvalMode mode,
                                                                 std::size_t k) {
  if (k < 1) throw InputError("top-K needs K >= 1");
  const std::size_t n = scene.n_objects();
  const std::size_t e = edge_count(n);
  if (obj_probs.rank() != 2 || obj_probs.rows() != n) {
    throw DimensionError("object beliefs " + shape_string(obj_probs.shape()) + " do not match " + std::to_string(n) +
                         " objects");
  }
  if (pred_probs.rank() != 2 || pred_probs.rows() != e || pred_probs.cols() < 2) {
    throw DimensionError("predicate beliefs " + shape_string(pred_probs.shape()) + " do not match " +
                         std::to_string(e) + " edges");
  }
  std::vector<std::size_t> labels(n);
  std::vector<double> label_prob(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mode == EvalMode::kPredCls) {
      labels[i] = scene.objects[i].label;
      label_prob[i] = 1.0;
    } else {
      labels[i] = argmax_row(obj_probs, i);
      label_prob[i] = obj_probs.at(i, labels[i]);
    }
  }
  const std::size_t width = pred_probs.cols();
  std::vector<PhrasePrediction> out;
  out.reserve(e * (width - 1));
  for (std::size_t edge = 0; edge < e; ++edge) {
    auto [s, o] = edge_pair(n, edge);
    for (std::size_t p = 1; p < width; ++p) {
      out.push_back({s, o, p, labels[s], labels[o], label_prob[s] * pred_probs.at(edge, p) * label_prob[o]});
    }
  }
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), phrase_before);
  out.resize(keep);
  return out;
}

namespace {

Tensor row_softmax(const Tensor& logits) {
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<double> out;
  out.reserve(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    auto p = softmax_values(logits.data().subspan(i * n, n));
    out.insert(out.end(), p.begin(), p.end());
  }
  return Tensor({m, n}, std::move(out));
}

}  // namespace

std::vector<PhrasePrediction> predict_phrases(const Tensor& obj_logits, const Tensor& pred_logits,
                                              const SceneInstance& scene, EvalMode mode, std::size_t k) {
  if (k < 1) throw InputError("top-K needs K >= 1");
  return predict_phrases_from_probabilities(row_softmax(obj_logits), row_softmax(pred_logits), scene, mode, k);
}

std::optional<double> recall_at_k(std::span<const PhrasePrediction> predictions, const SceneInstance& scene,
                                  std::size_t k) {
  if (scene.relations.empty()) return std::nullopt;
  const std::size_t top = std::min(k, predictions.size());
  std::vector<bool> used(top, false);
  std::size_t hits = 0;
  for (const auto& gt : scene.relations) {
    const std::size_t subj_label = scene.objects[gt.subj].label;
    const std::size_t obj_label = scene.objects[gt.obj].label;
    for (std::size_t q = 0; q < top; ++q) {
      const auto& p = predictions[q];
      if (used[q] || p.subj != gt.subj || p.obj != gt.obj || p.predicate != gt.predicate) continue;
      if (p.subj_label != subj_label || p.obj_label != obj_label) continue;
      used[q] = true;
      ++hits;
      break;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(scene.relations.size());
}

double object_accuracy(const Tensor& obj_logits, const SceneInstance& scene) {
  if (obj_logits.rank() != 2 || obj_logits.rows() != scene.n_objects()) {
    throw DimensionError("object logits " + shape_string(obj_logits.shape()) + " do not match scene '" + scene.id + "'");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scene.n_objects(); ++i) correct += argmax_row(obj_logits, i) == scene.objects[i].label;
  return static_cast<double>(correct) / static_cast<double>(scene.n_objects());
}

EvalReport evaluate_beliefs(std::span<const SceneInstance> scenes, std::span<const SceneBeliefs> beliefs,
                            EvalMode mode, std::span<const std::size_t> ks) {
  if (scenes.size() != beliefs.size()) throw DimensionError("one belief set per scene is required");
  EvalReport report;
  report.mode = mode;
  const std::size_t max_k = ks.empty() ? 1 : *std::max_element(ks.begin(), ks.end());
  std::map<std::size_t, double> recall_sum;
  for (auto k : ks) recall_sum[k] = 0.0;
  std::size_t correct = 0, objects = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& scene = scenes[s];
    for (std::size_t i = 0; i < scene.n_objects(); ++i) correct += argmax_row(beliefs[s].obj_probs, i) == scene.objects[i].label;
    objects += scene.n_objects();
    if (scene.relations.empty()) {
      ++report.scenes_skipped;
      continue;
    }
    auto phrases = predict_phrases_from_probabilities(beliefs[s].obj_probs, beliefs[s].pred_probs, scene, mode, max_k);
    for (auto k : ks) recall_sum[k] += *recall_at_k(phrases, scene, k);
    ++report.scenes_scored;
  }
  for (auto k : ks) report.r_at[k] = report.scenes_scored ? recall_sum[k] / static_cast<double>(report.scenes_scored) : 0.0;
  // PredCls is handed the labels, so only SGCls reports object accuracy.
  if (objects && mode == EvalMode::kSgCls) report.object_accuracy = static_cast<double>(correct) / static_cast<double>(objects);
  return report;
}

std::vector<SceneBeliefs> model_beliefs(const Dataset& data, const ModelParams& params, const ModelConfig& cfg,
                                        std::size_t workers) {
  std::vector<SceneBeliefs> out(data.size());
  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t s = begin; s < data.size(); s += stride) {
      Logits l = predict(data.inputs[s], params, cfg);
      out[s] = {row_softmax(l.obj), row_softmax(l.pred)};
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, data.size()));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  return out;
}

EvalReport evaluate_model(const Dataset& data, const ModelParams& params, const ModelConfig& cfg, EvalMode mode,
                          std::span<const std::size_t> ks, std::size_t workers) {
  auto beliefs = model_beliefs(data, params, cfg, workers);
  return evaluate_beliefs(data.scenes, beliefs, mode, ks);
}

// ---- FREQ baseline -------------------------------------------------------------

FreqBaseline FreqBaseline::fit(std::span<const SceneInstance> train, std::size_t n_obj_classes,
                               std::size_t n_pred_classes) {
  if (train.empty()) throw InputError("FREQ baseline needs a non-empty training corpus");
  FreqBaseline f;
  f.n_obj_classes_ = n_obj_classes;
  f.n_pred_classes_ = n_pred_classes;
  f.counts_.assign(n_obj_classes * n_obj_classes * (n_pred_classes + 1), 0);
  for (const auto& scene : train) {
    for (const auto& r : scene.relations) {
      const std::size_t s = scene.objects[r.subj].label, o = scene.objects[r.obj].label;
      if (s >= n_obj_classes || o >= n_obj_classes || r.predicate == 0 || r.predicate > n_pred_classes) {
        throw InputError("FREQ baseline: relation outside the configured class ranges in scene '" + scene.id + "'");
      }
      ++f.counts_[(s * n_obj_classes + o) * (n_pred_classes + 1) + r.predicate];
    }
  }
  return f;
}

std::vector<double> FreqBaseline::distribution(std::size_t subj_label, std::size_t obj_label) const {
  const std::size_t width = n_pred_classes_ + 1;
  const auto* row = counts_.data() + (subj_label * n_obj_classes_ + obj_label) * width;
  double total = static_cast<double>(n_pred_classes_);
  for (std::size_t p = 1; p < width; ++p) total += static_cast<double>(row[p]);
  std::vector<double> out(width, 0.0);
  for (std::size_t p = 1; p < width; ++p) out[p] = (static_cast<double>(row[p]) + 1.0) / total;
  return out;
}

SceneBeliefs FreqBaseline::beliefs(const SceneInstance& scene, EvalMode mode) const {
  const std::size_t n = scene.n_objects();
  std::vector<double> obj;
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sl = scene.objects[i].soft_label;
    obj.insert(obj.end(), sl.begin(), sl.end());
    labels[i] = mode == EvalMode::kPredCls
                    ? scene.objects[i].label
                    : static_cast<std::size_t>(std::max_element(sl.begin(), sl.end()) - sl.begin());
  }
  std::vector<double> pred;
  for (std::size_t e = 0; e < edge_count(n); ++e) {
    auto [s, o] = edge_pair(n, e);
    auto d = distribution(labels[s], labels[o]);
    pred.insert(pred.end(), d.begin(), d.end());
  }
  return {Tensor({n, n_obj_classes_}, std::move(obj)), Tensor({edge_count(n), n_pred_classes_ + 1}, std::move(pred))};
}

double detector_accuracy(std::span<const SceneInstance> scenes) {
  std::size_t correct = 0, total = 0;
  for (const auto& scene : scenes) {
    for (const auto& o : scene.objects) {
      const auto best = static_cast<std::size_t>(std::max_element(o.soft_label.begin(), o.soft_label.end()) -
                                                 o.soft_label.begin());
      correct += best == o.label;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace ilac
