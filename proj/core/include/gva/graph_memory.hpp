// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gva/caption_parser.hpp"
#include "gva/types.hpp"

namespace gva {

using EntityId = std::int64_t;
using EdgeId = std::int64_t;

struct GraphConfig {
  /// Weight of state consistency against relation persistence in temporal coherence.
  double coherence_alpha = 0.5;
  /// Number of observed frames looked back over when scoring coherence.
  int window = 5;
  /// Cosine similarity at or above which a new lemma merges into an existing entity.
  /// Values above 1 disable embedding-based merging.
  double merge_similarity = 0.85;

  void validate() const;
  bool operator==(const GraphConfig&) const = default;
};

/// One tracked entity: appearance frames, aggregate feature, caption snippets
/// and state history.
struct EntityNode {
  EntityId id = 0;
  std::string canonical_lemma;
  /// Other lemmas merged into this node by embedding similarity.
  std::set<std::string> aliases;
  EntityType entity_type = EntityType::Unknown;
  std::vector<FrameIndex> frame_indices;
  std::optional<Embedding> feature;
  /// Number of embeddings averaged into `feature`.
  int feature_count = 0;
  std::vector<std::pair<FrameIndex, std::string>> caption_snippets;
  std::vector<std::pair<FrameIndex, std::string>> state_history;

  bool answers_to(const std::string& lemma) const { return canonical_lemma == lemma || aliases.count(lemma) > 0; }
  bool operator==(const EntityNode&) const = default;
};

struct RelationEdge {
  EdgeId id = 0;
  EntityId src = 0;
  EntityId dst = 0;
  RelationCategory category = RelationCategory::Action;
  std::string predicate;
  std::vector<FrameIndex> frame_indices;

  bool operator==(const RelationEdge&) const = default;
};

/// Evolving entity-relation graph. The entity level is `nodes`, the relation
/// level is `edges`, the global level is `processed_frames` plus `version`.
/// Append-only: nothing is ever removed.
class VideoGraph {
 public:
  VideoGraph() = default;
  explicit VideoGraph(GraphConfig config);

  const GraphConfig& config() const { return config_; }
  std::uint64_t version() const { return version_; }
  const std::map<EntityId, EntityNode>& nodes() const { return nodes_; }
  const std::map<EdgeId, RelationEdge>& edges() const { return edges_; }
  const std::set<FrameIndex>& processed_frames() const { return processed_frames_; }
  /// Dimension of entity features, 0 until the first embedding arrives.
  std::size_t embedding_dim() const { return embedding_dim_; }

  const EntityNode& node(EntityId id) const;
  std::optional<EntityId> find_entity(const std::string& lemma) const;
  std::optional<EdgeId> find_edge(EntityId src, const std::string& predicate, EntityId dst) const;

  /// Merges `mention` observed at `frame` into the graph; see upsert_entity.
  EntityId upsert_entity(const Mention& mention, FrameIndex frame, const std::optional<Embedding>& embedding,
                         const std::string& snippet = {});
  EdgeId upsert_edge(EntityId src, EntityId dst, RelationCategory category, const std::string& predicate,
                     FrameIndex frame);
  void add_state_event(EntityId id, FrameIndex frame, const std::string& state);
  void mark_processed(FrameIndex frame) { processed_frames_.insert(frame); }
  void bump_version() { ++version_; }

  /// Reassembles a graph from stored parts (used by deserialisation). Checks
  /// every structural invariant and throws Error(Data) on violation.
  static VideoGraph from_parts(GraphConfig config, std::uint64_t version, std::size_t embedding_dim,
                               std::map<EntityId, EntityNode> nodes, std::map<EdgeId, RelationEdge> edges,
                               std::set<FrameIndex> processed_frames);
  void check_invariants() const;

  bool operator==(const VideoGraph&) const = default;

 private:
  GraphConfig config_;
  std::uint64_t version_ = 0;
  std::size_t embedding_dim_ = 0;
  std::map<EntityId, EntityNode> nodes_;
  std::map<EdgeId, RelationEdge> edges_;
  std::set<FrameIndex> processed_frames_;
  EntityId next_entity_id_ = 1;
  EdgeId next_edge_id_ = 1;
};

/// Merge rules, in order: same lemma (canonical or alias); embedding cosine
/// >= merge_similarity against an entity of compatible type that is not already
/// present at `frame`; otherwise a new entity. Re-observing a (lemma, frame)
/// pair is a no-op. Throws Error(Dimension) on an embedding of the wrong size.
EntityId upsert_entity(VideoGraph& graph, const Mention& mention, FrameIndex frame,
                       const std::optional<Embedding>& embedding);

/// Integrates a batch of newly captioned frames and returns the new graph.
/// Frames are applied in ascending index order so the result does not depend
/// on batch order. The version goes up by exactly one. Throws Error(InvalidArgument)
/// on mismatched inputs or an already-processed frame, leaving `graph` untouched.
VideoGraph update_graph(const VideoGraph& graph, const std::vector<FrameRecord>& new_records,
                        const std::vector<CaptionParse>& parses);

/// Fraction of the entity's last W observations (at frames <= f) whose
/// effective state matches the effective state at f.
double state_consistency(const VideoGraph& graph, EntityId id, FrameIndex f);

/// Fraction of edges incident to the entity at f that were also observed in
/// the previous W processed frames. 0 when there are none at f.
double relation_persistence(const VideoGraph& graph, EntityId id, FrameIndex f);

/// alpha * state_consistency + (1 - alpha) * relation_persistence.
double temporal_coherence(const VideoGraph& graph, EntityId id, FrameIndex f);

/// State label in effect for the entity at `frame` ("neutral" before any event).
std::string effective_state(const EntityNode& node, FrameIndex frame);

std::vector<FrameIndex> appearance_intervals(const VideoGraph& graph, EntityId id);

struct GraphSummary {
  std::string entity_summary;
  std::string relation_summary;
  std::string temporal_summary;

  std::size_t total_size() const { return entity_summary.size() + relation_summary.size() + temporal_summary.size(); }
};

inline constexpr std::size_t kMinSummaryBudget = 256;

/// Prompt-ready text for the three graph levels, at most `char_budget` bytes
/// in total. Lowest-ranked lines go first when trimming; lines are never cut.
GraphSummary summarize(const VideoGraph& graph, const QueryParse& query, std::size_t char_budget);

}  // namespace gva
