#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ilac {

struct BoundingBox {
  // Normalized to [0, 1] by image width/height; x1 < x2, y1 < y2.
  double x1 = 0, y1 = 0, x2 = 1, y2 = 1;

  std::array<double, 4> coords() const { return {x1, y1, x2, y2}; }
  static BoundingBox union_of(const BoundingBox& a, const BoundingBox& b);
};

struct SceneObject {
  std::size_t label = 0;
  BoundingBox bbox;
  std::vector<double> feature;     // length feat_dim
  std::vector<double> soft_label;  // isolated-detector distribution, length n_obj_classes
};

struct Relation {
  std::size_t subj = 0;
  std::size_t obj = 0;
  std::size_t predicate = 1;  // >= 1; class 0 is reserved for "no relation"

  friend bool operator==(const Relation&, const Relation&) = default;
};

// One annotated image.
struct SceneInstance {
  std::string id;
  std::optional<int> context_id;  // generator ground truth; absent for converted real data
  std::vector<SceneObject> objects;
  std::vector<Relation> relations;

  std::size_t n_objects() const { return objects.size(); }
};

// Throws InputError describing the first violated invariant.
void validate_scene(const SceneInstance& scene, std::size_t n_obj_classes, std::size_t n_pred_classes,
                    std::size_t feat_dim);

// Ordered pairs (i, j), i != j, enumerated row-major with the diagonal skipped.
std::size_t edge_count(std::size_t n_objects);
std::size_t edge_index(std::size_t n_objects, std::size_t subj, std::size_t obj);
std::pair<std::size_t, std::size_t> edge_pair(std::size_t n_objects, std::size_t edge);

}  // namespace ilac
