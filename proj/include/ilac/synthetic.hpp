#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ilac/scene.hpp"

namespace ilac {

// Parameters of the contextual scene generator. Each latent context owns a
// disjoint block of object classes; context_strength mixes that block with a
// uniform draw over all classes.
struct GenSpec {
  std::size_t n_contexts = 5;
  std::size_t n_obj_classes = 30;
  std::size_t n_pred_classes = 10;
  std::size_t scenes = 1000;
  std::size_t objects_min = 3, objects_max = 6;
  std::size_t relations_min = 1, relations_max = 4;
  double context_strength = 1.0;   // gamma in [0, 1]; 0 = context-free objects
  double detector_noise = 0.5;     // tau > 0; larger = weaker isolated detector
  std::size_t feat_dim = 32;
  double feature_noise = 1.0;      // stddev added to the class codebook vector
  double predicate_peak = 0.8;     // mass on the dominant predicate of each class pair; 1 = deterministic
  std::uint64_t seed = 1;

  void validate() const;  // throws SpecError

  friend bool operator==(const GenSpec&, const GenSpec&) = default;
};

// Fixed random quantities shared by every scene of a corpus, derived from
// (spec, seed) alone so loaders can rebuild them.
class FeatureSpace {
 public:
  explicit FeatureSpace(const GenSpec& spec);

  const GenSpec& spec() const { return spec_; }
  std::span<const double> codebook(std::size_t label) const;
  // P(predicate | subject class, object class) over predicates 1..n_pred_classes (index 0 unused, 0).
  std::span<const double> predicate_row(std::size_t subj_label, std::size_t obj_label) const;
  std::size_t dominant_predicate(std::size_t subj_label, std::size_t obj_label) const;
  // Object classes favoured by a context.
  std::vector<std::size_t> context_classes(std::size_t context) const;

  // Projection of [mean(f_i, f_j); union box] to feat_dim.
  std::vector<double> union_box_feature(const SceneInstance& scene, std::size_t i, std::size_t j) const;

  // Deterministic per-object synthesis used by the generator and by loaders
  // filling in absent fields.
  std::vector<double> synthesize_feature(const std::string& scene_id, std::size_t object, std::size_t label) const;
  std::vector<double> synthesize_soft_label(const std::string& scene_id, std::size_t object, std::size_t label) const;

 private:
  GenSpec spec_;
  std::vector<double> codebook_;    // [n_obj_classes x feat_dim]
  std::vector<double> projection_;  // [feat_dim x (feat_dim + 4)]
  std::vector<double> pred_table_;  // [n_obj_classes x n_obj_classes x (n_pred_classes + 1)]
};

// softmax(one_hot(label) / tau + noise_scale * N(0, 1)). Throws SpecError for tau <= 0.
std::vector<double> detector_soft_labels(std::size_t label, std::size_t n_classes, double tau, std::mt19937_64& rng,
                                         double noise_scale = 1.0);

struct CorpusSplits {
  std::vector<SceneInstance> train, val, test;
};

// Draws spec.scenes scenes and splits them 70/10/20 in generation order.
CorpusSplits generate_corpus(const GenSpec& spec);

// Corpus used by the ablation benchmarks: 2000 training scenes and a
// detector tuned to roughly 67% isolated accuracy.
GenSpec reference_spec(std::uint64_t seed = 1);

// Split sizes for n scenes: round(0.7 n), round(0.1 n), remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n);

}  // namespace ilac
