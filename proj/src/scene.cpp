#include "ilac/scene.hpp"

#include <algorithm>
#include <cmath>

#include "ilac/errors.hpp"

namespace ilac {

BoundingBox BoundingBox::union_of(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

void validate_scene(const SceneInstance& scene, std::size_t n_obj_classes, std::size_t n_pred_classes,
                    std::size_t feat_dim) {
  auto fail = [&](const std::string& what) { throw InputError("scene '" + scene.id + "': " + what); };
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    const std::string at = "object " + std::to_string(i) + " ";
    if (o.label >= n_obj_classes) fail(at + "label out of range");
    const auto& b = o.bbox;
    if (!(b.x1 < b.x2 && b.y1 < b.y2)) fail(at + "bbox must satisfy x1<x2, y1<y2");
    for (double c : b.coords())
      if (!(c >= 0.0 && c <= 1.0)) fail(at + "bbox coordinates must lie in [0,1]");
    if (o.feature.size() != feat_dim) fail(at + "feature length " + std::to_string(o.feature.size()) + " != " +
                                           std::to_string(feat_dim));
    if (o.soft_label.size() != n_obj_classes) fail(at + "soft label length mismatch");
    double total = 0.0;
    for (double p : o.soft_label) {
      if (!(p >= 0.0)) fail(at + "soft label has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(at + "soft label does not sum to 1");
    for (double f : o.feature)
      if (!std::isfinite(f)) fail(at + "feature is not finite");
  }
  for (const auto& r : scene.relations) {
    if (r.subj >= scene.objects.size() || r.obj >= scene.objects.size()) fail("relation endpoint out of range");
    if (r.subj == r.obj) fail("relation subject equals object");
    if (r.predicate == 0 || r.predicate > n_pred_classes) fail("relation predicate out of range [1, n_pred_classes]");
  }
}

std::size_t edge_count(std::size_t n_objects) { return n_objects < 2 ? 0 : n_objects * (n_objects - 1); }

std::size_t edge_index(std::size_t n_objects, std::size_t subj, std::size_t obj) {
  if (subj == obj || subj >= n_objects || obj >= n_objects) {
    throw IndexError("no edge slot for pair (" + std::to_string(subj) + ", " + std::to_string(obj) + ")");
  }
  return subj * (n_objects - 1) + (obj < subj ? obj : obj - 1);
}

std::pair<std::size_t, std::size_t> edge_pair(std::size_t n_objects, std::size_t edge) {
  const std::size_t subj = edge / (n_objects - 1);
  const std::size_t rest = edge % (n_objects - 1);
  return {subj, rest < subj ? rest : rest + 1};
}

}  // namespace ilac
