#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "ilac/corpus.hpp"
#include "ilac/entropy.hpp"
#include "ilac/errors.hpp"
#include "ilac/evaluation.hpp"
#include "ilac/synthetic.hpp"

namespace ilac {
namespace {

constexpr double kFrozenUnitTauAccuracy = 0.1827;

std::vector<SceneInstance> all_scenes(const CorpusSplits& s) {
  std::vector<SceneInstance> out = s.train;
  out.insert(out.end(), s.val.begin(), s.val.end());
  out.insert(out.end(), s.test.begin(), s.test.end());
  return out;
}

double entropy_gap(const GenSpec& g) {
  const auto scenes = all_scenes(generate_corpus(g));
  const auto reports = entropy_report(scenes, g.n_obj_classes, g.n_pred_classes);
  return reports[0].h_marginal - reports[0].h_conditional;
}

TEST(Generator, ContextFreeObjectsHaveNoEntropyGap) {
  GenSpec g;
  g.scenes = 10000;
  g.context_strength = 0.0;
  const double gap = entropy_gap(g);
  EXPECT_GE(gap, 0.0);
  EXPECT_LT(gap, 0.05);
}

TEST(Generator, DisjointContextsRemoveLogContextsOfEntropy) {
  GenSpec g;
  g.scenes = 10000;
  g.context_strength = 1.0;
  EXPECT_GE(entropy_gap(g), std::log(5.0) - 0.1);
}

TEST(Generator, PartialContextGivesPositiveGap) {
  GenSpec g;
  g.scenes = 2000;
  g.context_strength = 0.5;
  EXPECT_GT(entropy_gap(g), 0.05);
}

TEST(Generator, SplitsAreSeventyTenTwentyAndDisjoint) {
  GenSpec g;
  g.scenes = 1000;
  const CorpusSplits s = generate_corpus(g);
  EXPECT_EQ(s.train.size(), 700u);
  EXPECT_EQ(s.val.size(), 100u);
  EXPECT_EQ(s.test.size(), 200u);
  std::set<std::string> ids;
  for (const auto& scene : all_scenes(s)) EXPECT_TRUE(ids.insert(scene.id).second) << scene.id;
}

TEST(Generator, SplitSizesRound) {
  EXPECT_EQ(split_sizes(2857), (std::array<std::size_t, 3>{2000, 286, 571}));
  EXPECT_EQ(split_sizes(1), (std::array<std::size_t, 3>{1, 0, 0}));
  EXPECT_EQ(split_sizes(10), (std::array<std::size_t, 3>{7, 1, 2}));
}

TEST(Generator, EveryScenePassesValidation) {
  GenSpec g;
  g.scenes = 500;
  g.objects_min = 2;
  g.objects_max = 8;
  g.relations_max = 6;
  for (const auto& scene : all_scenes(generate_corpus(g))) {
    EXPECT_NO_THROW(validate_scene(scene, g.n_obj_classes, g.n_pred_classes, g.feat_dim)) << scene.id;
    EXPECT_GE(scene.n_objects(), 2u);
    EXPECT_LE(scene.n_objects(), 8u);
    EXPECT_GE(scene.relations.size(), 1u);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& r : scene.relations) {
      EXPECT_NE(r.subj, r.obj);
      EXPECT_GE(r.predicate, 1u);
      EXPECT_TRUE(pairs.insert({r.subj, r.obj}).second);
    }
    for (const auto& o : scene.objects) {
      double total = 0.0;
      for (double p : o.soft_label) {
        EXPECT_GE(p, 0.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Generator, ContextSupportsAreDisjointAndCoverAllClasses) {
  GenSpec g;
  g.n_obj_classes = 32;
  g.n_contexts = 5;
  const FeatureSpace fs(g);
  std::set<std::size_t> seen;
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t k : fs.context_classes(c)) EXPECT_TRUE(seen.insert(k).second);
  }
  EXPECT_EQ(seen.size(), 32u);
}

TEST(Generator, FullContextStrengthKeepsScenesInsideOneBlock) {
  GenSpec g;
  g.scenes = 300;
  g.context_strength = 1.0;
  const FeatureSpace fs(g);
  for (const auto& scene : all_scenes(generate_corpus(g))) {
    const auto block = fs.context_classes(static_cast<std::size_t>(*scene.context_id));
    for (const auto& o : scene.objects) EXPECT_TRUE(std::find(block.begin(), block.end(), o.label) != block.end());
  }
}

TEST(Generator, SameSeedGivesIdenticalCorpusText) {
  GenSpec g;
  g.scenes = 50;
  g.seed = 77;
  const CorpusSplits a = generate_corpus(g), b = generate_corpus(g);
  EXPECT_EQ(corpus_to_string({g, "train", a.train}), corpus_to_string({g, "train", b.train}));
  g.seed = 78;
  const CorpusSplits c = generate_corpus(g);
  EXPECT_NE(corpus_to_string({g, "train", a.train}), corpus_to_string({g, "train", c.train}));
}

TEST(Generator, InvalidSpecsAreRejected) {
  GenSpec g;
  g.n_contexts = 31;
  EXPECT_THROW(generate_corpus(g), SpecError);
  g = GenSpec{};
  g.detector_noise = 0.0;
  EXPECT_THROW(generate_corpus(g), SpecError);
  g.detector_noise = -1.0;
  EXPECT_THROW(generate_corpus(g), SpecError);
  g = GenSpec{};
  g.context_strength = 1.5;
  EXPECT_THROW(generate_corpus(g), SpecError);
  g = GenSpec{};
  g.objects_min = 1;
  EXPECT_THROW(generate_corpus(g), SpecError);
}

TEST(Generator, PredicatePeakOneMakesPredicatesDeterministic) {
  GenSpec g;
  g.scenes = 300;
  g.predicate_peak = 1.0;
  const FeatureSpace fs(g);
  for (const auto& scene : generate_corpus(g).train) {
    for (const auto& r : scene.relations) {
      EXPECT_EQ(r.predicate, fs.dominant_predicate(scene.objects[r.subj].label, scene.objects[r.obj].label));
    }
  }
}

TEST(Generator, FeaturesAreCodebookPlusNoise) {
  GenSpec g;
  g.scenes = 20;
  g.feature_noise = 0.0;
  const FeatureSpace fs(g);
  for (const auto& scene : generate_corpus(g).train) {
    for (const auto& o : scene.objects) {
      auto code = fs.codebook(o.label);
      ASSERT_EQ(o.feature.size(), code.size());
      for (std::size_t k = 0; k < code.size(); ++k) EXPECT_EQ(o.feature[k], code[k]);
    }
  }
}

// ---- detector ----------------------------------------------------------------

TEST(Detector, SoftLabelsSumToOne) {
  std::mt19937_64 rng(1);
  for (int draw = 0; draw < 10000; ++draw) {
    const auto p = detector_soft_labels(static_cast<std::size_t>(draw % 30), 30, 0.5, rng);
    double total = 0.0;
    for (double v : p) {
      ASSERT_GT(v, 0.0);
      total += v;
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Detector, SmallTemperatureWithoutNoiseIsOneHot) {
  std::mt19937_64 rng(1);
  const auto p = detector_soft_labels(3, 10, 1e-3, rng, 0.0);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(p[k], k == 3 ? 1.0 : 0.0, 1e-300);
}

TEST(Detector, NonPositiveTemperatureIsASpecError) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(detector_soft_labels(0, 5, 0.0, rng), SpecError);
  EXPECT_THROW(detector_soft_labels(0, 5, -0.5, rng), SpecError);
}

TEST(Detector, HigherTemperatureIsWeaker) {
  double previous = 1.0;
  for (double tau : {0.3, 0.5, 1.0, 2.0}) {
    GenSpec g;
    g.scenes = 2000;
    g.detector_noise = tau;
    const double acc = detector_accuracy(all_scenes(generate_corpus(g)));
    EXPECT_LT(acc, previous) << "tau " << tau;
    previous = acc;
  }
}

// P(1 + Z_0 > max_k Z_k) over 29 independent standard normal competitors,
// by trapezoidal quadrature of phi(x) Phi(x + 1)^29.
double unit_tau_accuracy_oracle(std::size_t n_classes) {
  const double a = -10.0, b = 10.0;
  const int steps = 20000;
  const double h = (b - a) / steps;
  double total = 0.0;
  for (int s = 0; s <= steps; ++s) {
    const double x = a + s * h;
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double cdf = 0.5 * std::erfc(-(x + 1.0) / std::sqrt(2.0));
    const double w = (s == 0 || s == steps) ? 0.5 : 1.0;
    total += w * phi * std::pow(cdf, static_cast<double>(n_classes - 1));
  }
  return total * h;
}

TEST(Detector, UnitTemperatureAccuracyMatchesQuadratureAndFrozenBand) {
  GenSpec g;
  g.scenes = 10000;
  g.detector_noise = 1.0;
  const double acc = detector_accuracy(all_scenes(generate_corpus(g)));
  EXPECT_NEAR(acc, unit_tau_accuracy_oracle(30), 0.01);
  // Measured once on this generator (seed 1) and frozen.
  EXPECT_NEAR(acc, kFrozenUnitTauAccuracy, 0.005);
}

// ---- union box feature -------------------------------------------------------

SceneInstance two_objects(const GenSpec& g, BoundingBox a, BoundingBox b, bool same_feature) {
  const FeatureSpace fs(g);
  SceneInstance s;
  s.id = "pair";
  SceneObject x, y;
  x.label = 1;
  y.label = same_feature ? 1 : 2;
  x.bbox = a;
  y.bbox = b;
  x.feature = fs.synthesize_feature("pair", 0, x.label);
  y.feature = same_feature ? x.feature : fs.synthesize_feature("pair", 1, y.label);
  s.objects = {x, y};
  return s;
}

TEST(UnionBox, GeometryIsSymmetric) {
  const BoundingBox a{0.1, 0.2, 0.4, 0.5}, b{0.3, 0.1, 0.9, 0.35};
  const auto u = BoundingBox::union_of(a, b).coords();
  EXPECT_EQ(u, BoundingBox::union_of(b, a).coords());
  EXPECT_EQ(u, (std::array<double, 4>{0.1, 0.1, 0.9, 0.5}));
}

TEST(UnionBox, FeatureIsSymmetricForSwappedEndpoints) {
  GenSpec g;
  const FeatureSpace fs(g);
  const SceneInstance s = two_objects(g, {0.1, 0.2, 0.4, 0.5}, {0.3, 0.1, 0.9, 0.35}, false);
  const auto ij = fs.union_box_feature(s, 0, 1), ji = fs.union_box_feature(s, 1, 0);
  ASSERT_EQ(ij.size(), g.feat_dim);
  for (std::size_t k = 0; k < ij.size(); ++k) EXPECT_NEAR(ij[k], ji[k], 1e-15);
}

TEST(UnionBox, IdenticalObjectsGiveIdenticalFeatures) {
  GenSpec g;
  const FeatureSpace fs(g);
  const SceneInstance s = two_objects(g, {0.2, 0.2, 0.5, 0.5}, {0.2, 0.2, 0.5, 0.5}, true);
  EXPECT_EQ(fs.union_box_feature(s, 0, 1), fs.union_box_feature(s, 1, 0));
}

TEST(UnionBox, DependsOnGeometry) {
  GenSpec g;
  const FeatureSpace fs(g);
  const SceneInstance near = two_objects(g, {0.1, 0.1, 0.2, 0.2}, {0.2, 0.2, 0.3, 0.3}, false);
  const SceneInstance far = two_objects(g, {0.1, 0.1, 0.2, 0.2}, {0.7, 0.7, 0.9, 0.9}, false);
  EXPECT_NE(fs.union_box_feature(near, 0, 1), fs.union_box_feature(far, 0, 1));
}

TEST(UnionBox, IsReproducible) {
  GenSpec g;
  g.seed = 5;
  const SceneInstance s = two_objects(g, {0.1, 0.2, 0.4, 0.5}, {0.3, 0.1, 0.9, 0.35}, false);
  EXPECT_EQ(FeatureSpace(g).union_box_feature(s, 0, 1), FeatureSpace(g).union_box_feature(s, 0, 1));
}

TEST(UnionBox, SameObjectIsAnIndexError) {
  GenSpec g;
  const FeatureSpace fs(g);
  const SceneInstance s = two_objects(g, {0.1, 0.2, 0.4, 0.5}, {0.3, 0.1, 0.9, 0.35}, false);
  EXPECT_THROW(fs.union_box_feature(s, 1, 1), IndexError);
  EXPECT_THROW(fs.union_box_feature(s, 0, 2), IndexError);
}

TEST(Reference, SpecDescribesTheAblationCorpus) {
  const GenSpec g = reference_spec();
  EXPECT_EQ(g.n_contexts, 5u);
  EXPECT_EQ(g.n_obj_classes, 30u);
  EXPECT_EQ(g.n_pred_classes, 10u);
  EXPECT_EQ(split_sizes(g.scenes)[0], 2000u);
  const double acc = detector_accuracy(generate_corpus(g).test);
  EXPECT_GE(acc, 0.65);
  EXPECT_LE(acc, 0.70);
}

}  // namespace
}  // namespace ilac
