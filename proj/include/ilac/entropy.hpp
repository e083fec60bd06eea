#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ilac/scene.hpp"

namespace ilac {

enum class Category { kObjects, kPredicates };

std::string to_string(Category c);

// Entropies in nats.
struct EntropyReport {
  Category category = Category::kObjects;
  std::size_t n_classes = 0;
  double h_max = 0.0;
  double h_marginal = 0.0;
  double h_conditional = 0.0;
  std::size_t scenes_skipped = 0;  // scenes with fewer than two objects
};

// -sum p ln p over the nonzero cells of counts / sum(counts). Throws
// DomainError when every count is zero.
double empirical_entropy(std::span<const std::uint64_t> counts);

// Empirical joint over (item, conditioning object) pairs. For objects every
// ordered pair of distinct objects in a scene contributes one entry; for
// predicates every (relation, scene object) pair does.
struct ContextJoint {
  std::size_t n_items = 0;
  std::size_t n_context = 0;
  std::vector<std::uint64_t> counts;  // [n_items x n_context]
  std::size_t scenes_skipped = 0;

  std::vector<std::uint64_t> item_marginal() const;
  std::vector<std::uint64_t> context_marginal() const;
};

ContextJoint context_joint(std::span<const SceneInstance> scenes, Category category, std::size_t n_obj_classes,
                           std::size_t n_pred_classes);

// sum_c p(c) H(X | C = c) from the joint.
double conditional_entropy(const ContextJoint& joint);
double conditional_entropy(std::span<const SceneInstance> scenes, Category category, std::size_t n_obj_classes,
                           std::size_t n_pred_classes);

// Objects then predicates. h_max = ln(n_classes); the marginal and the
// conditional entropy come from the same joint, so conditioning never
// increases entropy.
std::array<EntropyReport, 2> entropy_report(std::span<const SceneInstance> scenes, std::size_t n_obj_classes,
                                            std::size_t n_pred_classes);

std::string format_entropy_table(std::span<const EntropyReport> reports);

}  // namespace ilac
