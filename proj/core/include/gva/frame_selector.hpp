// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "gva/caption_parser.hpp"
#include "gva/graph_memory.hpp"
#include "gva/types.hpp"

namespace gva {

struct SelectorConfig {
  double weight_graph = 0.5;
  double weight_visual = 0.3;
  double weight_temporal = 0.2;
  /// Frames added per retrieval round.
  int k = 3;
  /// Length scale (frames) of the appearance-proximity decay.
  double decay_len = 16.0;
  /// Decay length multiplier for the expanded (last) retrieval round.
  double expanded_decay_multiplier = 2.0;

  void validate() const;
  double effective_decay(bool expanded) const { return expanded ? decay_len * expanded_decay_multiplier : decay_len; }
  bool operator==(const SelectorConfig&) const = default;
};

struct ScoreComponents {
  double graph = 0;
  double visual = 0;
  double temporal = 0;
};

struct FrameScore {
  FrameIndex frame_index = 0;
  double s_graph = 0;
  double s_visual = 0;
  double s_temporal = 0;
  double combined = 0;
};

struct Candidate {
  FrameIndex frame_index = 0;
  std::optional<Embedding> embedding;
};

struct Segment {
  FrameIndex start = 0;
  FrameIndex end = 0;  // inclusive

  FrameIndex length() const { return end - start + 1; }
  bool operator==(const Segment&) const = default;
};

/// Sum over query entities found in the graph of exp(-d / L), d being the
/// distance from f to the entity's nearest appearance.
double graph_score_raw(FrameIndex f, const VideoGraph& graph, const QueryParse& query, bool expanded,
                       const SelectorConfig& cfg = {});

/// (1 + cos) / 2. A zero-norm vector scores a neutral 0.5.
double visual_score_raw(const Embedding& frame_embedding, const Embedding& query_embedding);

/// Coverage of the unexplored gap around f: gap_length / total_frames scaled by
/// how central f is in that gap. 0 for frames already selected.
double temporal_score_raw(FrameIndex f, const std::vector<FrameIndex>& selected, int total_frames);

/// Min-max normalisation to [0, 1]; a constant list maps to 0.5 everywhere.
std::vector<double> normalize_scores(const std::vector<double>& raw);

double combined_score(const ScoreComponents& components, const SelectorConfig& cfg = {});

/// Normalised per-candidate scores, in candidate order.
std::vector<FrameScore> score_candidates(const std::vector<Candidate>& candidates, const VideoGraph& graph,
                                         const QueryParse& query, const std::optional<Embedding>& query_embedding,
                                         const std::vector<FrameIndex>& selected, int total_frames,
                                         const SelectorConfig& cfg, bool expanded);

/// Top-k candidates by combined score (ties to the lower frame), returned in
/// ascending frame order. Candidates must not overlap `selected`.
std::vector<FrameIndex> select_frames(const std::vector<Candidate>& candidates, const VideoGraph& graph,
                                      const QueryParse& query, const std::optional<Embedding>& query_embedding,
                                      const std::vector<FrameIndex>& selected, int total_frames,
                                      const SelectorConfig& cfg, bool expanded);

/// Windows around clusters of query-entity appearances, padded by the decay
/// length. Falls back to the whole video when no query entity is in the graph,
/// and always returns the whole video when `expanded`.
std::vector<Segment> identify_segments(const VideoGraph& graph, const QueryParse& query, int total_frames,
                                       bool expanded, const SelectorConfig& cfg = {});

/// Candidate frames from `segments`: each window subsampled with stride
/// max(1, length / 32), minus `selected`, optionally restricted to `available`.
std::vector<FrameIndex> candidate_frames(const std::vector<Segment>& segments, const std::vector<FrameIndex>& selected,
                                         const std::optional<std::vector<FrameIndex>>& available = std::nullopt);

}  // namespace gva
