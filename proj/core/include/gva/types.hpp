// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gva {

using FrameIndex = int;
using Embedding = std::vector<double>;

/// Hierarchical entity categories. `Unknown` only exists before classification.
enum class EntityType { Person, Location, Object, Group, Unknown };

enum class RelationCategory { Spatial, Interaction, Action };

std::string_view to_string(EntityType type);
std::string_view to_string(RelationCategory category);

/// Throws gva::Error(Parse) on an unrecognised name. Matching is case-insensitive.
EntityType entity_type_from_string(std::string_view name);
RelationCategory relation_category_from_string(std::string_view name);

/// The unit of ingestion and retrieval: one frame with whatever the providers
/// returned for it.
struct FrameRecord {
  FrameIndex frame_index = 0;
  std::string caption;
  std::optional<Embedding> embedding;

  bool operator==(const FrameRecord&) const = default;
};

}  // namespace gva
