// SPDX-License-Identifier: Apache-2.0
#include "gva/types.hpp"

#include <algorithm>
#include <cctype>

#include "gva/error.hpp"
#include "gva/session.hpp"

namespace gva {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view name, const Enum (&values)[N], const char* what) {
  for (auto v : values) {
    if (iequals(to_string(v), name)) return v;
  }
  throw Error(ErrorKind::Parse, std::string("unknown ") + what + " '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::Person: return "Person";
    case EntityType::Location: return "Location";
    case EntityType::Object: return "Object";
    case EntityType::Group: return "Group";
    case EntityType::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::string_view to_string(RelationCategory category) {
  switch (category) {
    case RelationCategory::Spatial: return "Spatial";
    case RelationCategory::Interaction: return "Interaction";
    case RelationCategory::Action: return "Action";
  }
  return "Action";
}

EntityType entity_type_from_string(std::string_view name) {
  static constexpr EntityType all[] = {EntityType::Person, EntityType::Location, EntityType::Object, EntityType::Group,
                                       EntityType::Unknown};
  return enum_from(name, all, "entity type");
}

RelationCategory relation_category_from_string(std::string_view name) {
  static constexpr RelationCategory all[] = {RelationCategory::Spatial, RelationCategory::Interaction,
                                             RelationCategory::Action};
  return enum_from(name, all, "relation category");
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::Answer: return "answer";
    case Action::Retrieve: return "retrieve";
    case Action::RetrieveExpanded: return "retrieve_expanded";
  }
  return "answer";
}

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::Confident: return "confident";
    case Termination::RoundLimit: return "round_limit";
    case Termination::Exhausted: return "exhausted";
  }
  return "confident";
}

Action action_from_string(std::string_view name) {
  static constexpr Action all[] = {Action::Answer, Action::Retrieve, Action::RetrieveExpanded};
  return enum_from(name, all, "action");
}

Termination termination_from_string(std::string_view name) {
  static constexpr Termination all[] = {Termination::Confident, Termination::RoundLimit, Termination::Exhausted};
  return enum_from(name, all, "termination");
}

}  // namespace gva
