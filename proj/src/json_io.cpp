#include "ilac/json_io.hpp"

namespace ilac {

namespace {

template <class T>
void get_opt(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const GenSpec& s) {
  j = nlohmann::json{{"n_contexts", s.n_contexts},
                     {"n_obj_classes", s.n_obj_classes},
                     {"n_pred_classes", s.n_pred_classes},
                     {"scenes", s.scenes},
                     {"objects_min", s.objects_min},
                     {"objects_max", s.objects_max},
                     {"relations_min", s.relations_min},
                     {"relations_max", s.relations_max},
                     {"context_strength", s.context_strength},
                     {"detector_noise", s.detector_noise},
                     {"feat_dim", s.feat_dim},
                     {"feature_noise", s.feature_noise},
                     {"predicate_peak", s.predicate_peak},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, GenSpec& s) {
  get_opt(j, "n_contexts", s.n_contexts);
  get_opt(j, "n_obj_classes", s.n_obj_classes);
  get_opt(j, "n_pred_classes", s.n_pred_classes);
  get_opt(j, "scenes", s.scenes);
  get_opt(j, "objects_min", s.objects_min);
  get_opt(j, "objects_max", s.objects_max);
  get_opt(j, "relations_min", s.relations_min);
  get_opt(j, "relations_max", s.relations_max);
  get_opt(j, "context_strength", s.context_strength);
  get_opt(j, "detector_noise", s.detector_noise);
  get_opt(j, "feat_dim", s.feat_dim);
  get_opt(j, "feature_noise", s.feature_noise);
  get_opt(j, "predicate_peak", s.predicate_peak);
  get_opt(j, "seed", s.seed);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_c", c.d_c},
                     {"d_v", c.d_v},
                     {"d_e", c.d_e},
                     {"d_phi", c.d_phi},
                     {"n_iters", c.n_iters},
                     {"n_obj_classes", c.n_obj_classes},
                     {"n_pred_classes", c.n_pred_classes},
                     {"feat_dim", c.feat_dim},
                     {"bbox_dim", c.bbox_dim},
                     {"use_context", c.use_context},
                     {"node_uses_previous_context", c.node_uses_previous_context}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  get_opt(j, "d_c", c.d_c);
  get_opt(j, "d_v", c.d_v);
  get_opt(j, "d_e", c.d_e);
  get_opt(j, "d_phi", c.d_phi);
  get_opt(j, "n_iters", c.n_iters);
  get_opt(j, "n_obj_classes", c.n_obj_classes);
  get_opt(j, "n_pred_classes", c.n_pred_classes);
  get_opt(j, "feat_dim", c.feat_dim);
  get_opt(j, "bbox_dim", c.bbox_dim);
  get_opt(j, "use_context", c.use_context);
  get_opt(j, "node_uses_previous_context", c.node_uses_previous_context);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"predicates_per_image", c.predicates_per_image},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"seed", c.seed},
                     {"clip_norm", c.clip_norm},
                     {"workers", c.workers}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  get_opt(j, "learning_rate", c.learning_rate);
  get_opt(j, "batch_size", c.batch_size);
  get_opt(j, "epochs", c.epochs);
  get_opt(j, "predicates_per_image", c.predicates_per_image);
  get_opt(j, "adam_beta1", c.adam_beta1);
  get_opt(j, "adam_beta2", c.adam_beta2);
  get_opt(j, "adam_eps", c.adam_eps);
  get_opt(j, "seed", c.seed);
  get_opt(j, "clip_norm", c.clip_norm);
  get_opt(j, "workers", c.workers);
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, v] : r.r_at) recall[std::to_string(k)] = v;
  j = nlohmann::json{{"mode", to_string(r.mode)},
                     {"recall", std::move(recall)},
                     {"object_accuracy", r.object_accuracy ? nlohmann::json(*r.object_accuracy) : nlohmann::json(nullptr)},
                     {"scenes_scored", r.scenes_scored},
                     {"scenes_skipped", r.scenes_skipped}};
}

void to_json(nlohmann::json& j, const EntropyReport& r) {
  j = nlohmann::json{{"category", to_string(r.category)}, {"n_classes", r.n_classes},
                     {"h_max", r.h_max},          {"h_marginal", r.h_marginal},
                     {"h_conditional", r.h_conditional}, {"scenes_skipped", r.scenes_skipped}};
}

}  // namespace ilac
