#include "ilac/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ilac/errors.hpp"

namespace ilac {

std::string to_string(Category c) { return c == Category::kObjects ? "objects" : "predicates"; }

double empirical_entropy(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw DomainError("entropy of an all-zero count vector");
  // Summing in sorted order makes the result exactly invariant to relabelling.
  std::vector<std::uint64_t> sorted;
  for (auto c : counts)
    if (c != 0) sorted.push_back(c);
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (auto c : sorted) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

std::vector<std::uint64_t> ContextJoint::item_marginal() const {
  std::vector<std::uint64_t> out(n_items, 0);
  for (std::size_t x = 0; x < n_items; ++x)
    for (std::size_t c = 0; c < n_context; ++c) out[x] += counts[x * n_context + c];
  return out;
}

std::vector<std::uint64_t> ContextJoint::context_marginal() const {
  std::vector<std::uint64_t> out(n_context, 0);
  for (std::size_t x = 0; x < n_items; ++x)
    for (std::size_t c = 0; c < n_context; ++c) out[c] += counts[x * n_context + c];
  return out;
}

ContextJoint context_joint(std::span<const SceneInstance> scenes, Category category, std::size_t n_obj_classes,
                           std::size_t n_pred_classes) {
  ContextJoint joint;
  joint.n_context = n_obj_classes;
  joint.n_items = category == Category::kObjects ? n_obj_classes : n_pred_classes + 1;
  joint.counts.assign(joint.n_items * joint.n_context, 0);
  auto check_label = [&](std::size_t label, std::size_t limit, const SceneInstance& scene) {
    if (label >= limit) throw InputError("label out of range in scene '" + scene.id + "'");
  };
  for (const auto& scene : scenes) {
    const std::size_t n = scene.n_objects();
    if (n < 2) {
      ++joint.scenes_skipped;
      continue;
    }
    for (const auto& o : scene.objects) check_label(o.label, n_obj_classes, scene);
    if (category == Category::kObjects) {
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < n; ++c)
          if (c != t) ++joint.counts[scene.objects[t].label * joint.n_context + scene.objects[c].label];
    } else {
      for (const auto& r : scene.relations) {
        check_label(r.predicate, joint.n_items, scene);
        for (const auto& o : scene.objects) ++joint.counts[r.predicate * joint.n_context + o.label];
      }
    }
  }
  return joint;
}

double conditional_entropy(const ContextJoint& joint) {
  // H(X|C) = H(X, C) - H(C).
  return empirical_entropy(joint.counts) - empirical_entropy(joint.context_marginal());
}

double conditional_entropy(std::span<const SceneInstance> scenes, Category category, std::size_t n_obj_classes,
                           std::size_t n_pred_classes) {
  return conditional_entropy(context_joint(scenes, category, n_obj_classes, n_pred_classes));
}

std::array<EntropyReport, 2> entropy_report(std::span<const SceneInstance> scenes, std::size_t n_obj_classes,
                                            std::size_t n_pred_classes) {
  if (scenes.empty()) throw InputError("entropy study needs a non-empty corpus");
  std::array<EntropyReport, 2> out;
  const Category cats[] = {Category::kObjects, Category::kPredicates};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto joint = context_joint(scenes, cats[k], n_obj_classes, n_pred_classes);
    auto& r = out[k];
    r.category = cats[k];
    r.n_classes = cats[k] == Category::kObjects ? n_obj_classes : n_pred_classes;
    r.h_max = std::log(static_cast<double>(r.n_classes));
    r.h_marginal = empirical_entropy(joint.item_marginal());
    // Clamp summation noise at the exact-zero boundary.
    r.h_conditional = std::max(0.0, conditional_entropy(joint));
    r.scenes_skipped = joint.scenes_skipped;
  }
  return out;
}

std::string format_entropy_table(std::span<const EntropyReport> reports) {
  std::string out = "Category       H_max    H(x)   H(x|c_i)\n";
  char line[96];
  for (const auto& r : reports) {
    std::string name = to_string(r.category);
    name[0] = static_cast<char>(std::toupper(name[0]));
    std::snprintf(line, sizeof line, "%-12s %7.2f %7.2f %8.2f\n", name.c_str(), r.h_max, r.h_marginal, r.h_conditional);
    out += line;
  }
  return out;
}

}  // namespace ilac
