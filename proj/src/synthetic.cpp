#include "ilac/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ilac/errors.hpp"

namespace ilac {

namespace {

// Stream tags keep the random quantities of a corpus independent of each other.
enum StreamTag : std::uint32_t {
  kCodebook = 1,
  kProjection = 2,
  kPredicateTable = 3,
  kScene = 4,
  kFeature = 5,
  kSoftLabel = 6,
};

std::uint32_t fnv1a(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag, std::uint32_t a = 0, std::uint32_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag, a, b};
  return std::mt19937_64(seq);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::size_t sample_categorical(std::span<const double> probs, std::mt19937_64& rng) {
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    if (u < probs[k]) return k;
    u -= probs[k];
  }
  // Rounding leftovers land on the last class with mass.
  for (std::size_t k = probs.size(); k-- > 0;)
    if (probs[k] > 0.0) return k;
  return 0;
}

}  // namespace

void GenSpec::validate() const {
  if (n_contexts < 1 || n_obj_classes < 1 || n_pred_classes < 1 || scenes < 1 || feat_dim < 1) {
    throw SpecError("generator counts must all be >= 1");
  }
  if (n_obj_classes < n_contexts) {
    throw SpecError("need at least as many object classes (" + std::to_string(n_obj_classes) + ") as contexts (" +
                    std::to_string(n_contexts) + ")");
  }
  if (objects_min < 2 || objects_max < objects_min) throw SpecError("objects per scene range must satisfy 2 <= min <= max");
  if (relations_max < relations_min) throw SpecError("relations per scene range must satisfy min <= max");
  if (!(context_strength >= 0.0 && context_strength <= 1.0)) throw SpecError("context_strength must lie in [0, 1]");
  if (!(detector_noise > 0.0)) throw SpecError("detector_noise (tau) must be > 0");
  if (!(feature_noise >= 0.0)) throw SpecError("feature_noise must be >= 0");
  if (!(predicate_peak >= 0.0 && predicate_peak <= 1.0)) throw SpecError("predicate_peak must lie in [0, 1]");
}

FeatureSpace::FeatureSpace(const GenSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t c = spec_.n_obj_classes, f = spec_.feat_dim, p = spec_.n_pred_classes;

  auto rng = stream(spec_.seed, kCodebook);
  std::normal_distribution<double> unit(0.0, 1.0);
  codebook_.resize(c * f);
  for (double& v : codebook_) v = unit(rng);

  rng = stream(spec_.seed, kProjection);
  const std::size_t in = f + 4;
  std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  projection_.resize(f * in);
  for (double& v : projection_) v = proj(rng);

  rng = stream(spec_.seed, kPredicateTable);
  pred_table_.assign(c * c * (p + 1), 0.0);
  for (std::size_t s = 0; s < c; ++s) {
    for (std::size_t o = 0; o < c; ++o) {
      double* row = pred_table_.data() + (s * c + o) * (p + 1);
      const std::size_t dominant = uniform_index(rng, 1, p);
      for (std::size_t k = 1; k <= p; ++k) row[k] = (1.0 - spec_.predicate_peak) / static_cast<double>(p);
      row[dominant] += spec_.predicate_peak;
    }
  }
}

std::span<const double> FeatureSpace::codebook(std::size_t label) const {
  return std::span<const double>(codebook_).subspan(label * spec_.feat_dim, spec_.feat_dim);
}

std::span<const double> FeatureSpace::predicate_row(std::size_t subj_label, std::size_t obj_label) const {
  const std::size_t width = spec_.n_pred_classes + 1;
  return std::span<const double>(pred_table_).subspan((subj_label * spec_.n_obj_classes + obj_label) * width, width);
}

std::size_t FeatureSpace::dominant_predicate(std::size_t subj_label, std::size_t obj_label) const {
  auto row = predicate_row(subj_label, obj_label);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<std::size_t> FeatureSpace::context_classes(std::size_t context) const {
  const std::size_t base = spec_.n_obj_classes / spec_.n_contexts;
  const std::size_t rem = spec_.n_obj_classes % spec_.n_contexts;
  const std::size_t begin = context * base + std::min(context, rem);
  const std::size_t size = base + (context < rem ? 1 : 0);
  std::vector<std::size_t> out(size);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

std::vector<double> FeatureSpace::union_box_feature(const SceneInstance& scene, std::size_t i, std::size_t j) const {
  if (i == j) throw IndexError("union box feature needs two distinct objects, got (" + std::to_string(i) + ", " +
                               std::to_string(j) + ")");
  if (i >= scene.n_objects() || j >= scene.n_objects()) throw IndexError("union box feature: object index out of range");
  const std::size_t f = spec_.feat_dim;
  const auto& a = scene.objects[i];
  const auto& b = scene.objects[j];
  std::vector<double> x(f + 4);
  for (std::size_t k = 0; k < f; ++k) x[k] = 0.5 * (a.feature[k] + b.feature[k]);
  auto box = BoundingBox::union_of(a.bbox, b.bbox).coords();
  std::copy(box.begin(), box.end(), x.begin() + static_cast<std::ptrdiff_t>(f));
  std::vector<double> out(f, 0.0);
  for (std::size_t r = 0; r < f; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < f + 4; ++k) s += projection_[r * (f + 4) + k] * x[k];
    out[r] = s;
  }
  return out;
}

std::vector<double> FeatureSpace::synthesize_feature(const std::string& scene_id, std::size_t object,
                                                     std::size_t label) const {
  auto rng = stream(spec_.seed, kFeature, fnv1a(scene_id), static_cast<std::uint32_t>(object));
  std::normal_distribution<double> noise(0.0, 1.0);
  auto code = codebook(label);
  std::vector<double> out(code.begin(), code.end());
  for (double& v : out) v += spec_.feature_noise * noise(rng);
  return out;
}

std::vector<double> FeatureSpace::synthesize_soft_label(const std::string& scene_id, std::size_t object,
                                                        std::size_t label) const {
  auto rng = stream(spec_.seed, kSoftLabel, fnv1a(scene_id), static_cast<std::uint32_t>(object));
  return detector_soft_labels(label, spec_.n_obj_classes, spec_.detector_noise, rng);
}

std::vector<double> detector_soft_labels(std::size_t label, std::size_t n_classes, double tau, std::mt19937_64& rng,
                                         double noise_scale) {
  if (!(tau > 0.0)) throw SpecError("detector temperature tau must be > 0");
  if (label >= n_classes) throw IndexError("detector label out of range");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> logits(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) logits[k] = (k == label ? 1.0 / tau : 0.0) + noise_scale * noise(rng);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) total += (v = std::exp(v - mx));
  for (double& v : logits) v /= total;
  return logits;
}

std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const auto val = std::min(n - train, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  return {train, val, n - train - val};
}

CorpusSplits generate_corpus(const GenSpec& spec) {
  const FeatureSpace space(spec);
  std::vector<SceneInstance> scenes;
  scenes.reserve(spec.scenes);
  for (std::size_t s = 0; s < spec.scenes; ++s) {
    auto rng = stream(spec.seed, kScene, static_cast<std::uint32_t>(s));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SceneInstance scene;
    char id[32];
    std::snprintf(id, sizeof id, "scene-%06zu", s);
    scene.id = id;
    const std::size_t context = uniform_index(rng, 0, spec.n_contexts - 1);
    scene.context_id = static_cast<int>(context);
    const auto favoured = space.context_classes(context);

    const std::size_t n = uniform_index(rng, spec.objects_min, spec.objects_max);
    for (std::size_t i = 0; i < n; ++i) {
      SceneObject o;
      o.label = unit(rng) < spec.context_strength ? favoured[uniform_index(rng, 0, favoured.size() - 1)]
                                                  : uniform_index(rng, 0, spec.n_obj_classes - 1);
      const double x1 = unit(rng) * 0.7, y1 = unit(rng) * 0.7;
      const double w = 0.05 + unit(rng) * 0.25, h = 0.05 + unit(rng) * 0.25;
      o.bbox = {x1, y1, x1 + w, y1 + h};
      o.feature = space.synthesize_feature(scene.id, i, o.label);
      o.soft_label = space.synthesize_soft_label(scene.id, i, o.label);
      scene.objects.push_back(std::move(o));
    }

    // Relations sit on distinct ordered pairs chosen uniformly.
    const std::size_t pairs = edge_count(n);
    const std::size_t n_rel = std::min(pairs, uniform_index(rng, spec.relations_min, spec.relations_max));
    std::vector<std::size_t> order(pairs);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < n_rel; ++k) {
      std::swap(order[k], order[uniform_index(rng, k, pairs - 1)]);
      auto [si, oi] = edge_pair(n, order[k]);
      const std::size_t pred =
          sample_categorical(space.predicate_row(scene.objects[si].label, scene.objects[oi].label), rng);
      scene.relations.push_back({si, oi, pred});
    }
    scenes.push_back(std::move(scene));
  }

  const auto sizes = split_sizes(scenes.size());
  CorpusSplits out;
  auto it = std::make_move_iterator(scenes.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  out.val.assign(it + static_cast<std::ptrdiff_t>(sizes[0]), it + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  out.test.assign(it + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), std::make_move_iterator(scenes.end()));
  return out;
}

GenSpec reference_spec(std::uint64_t seed) {
  GenSpec s;
  s.scenes = 2857;
  s.context_strength = 0.9;
  s.detector_noise = 0.40;
  s.feature_noise = 1.5;
  s.feat_dim = 8;
  s.seed = seed;
  return s;
}

}  // namespace ilac
