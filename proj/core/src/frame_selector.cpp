// SPDX-License-Identifier: Apache-2.0
#include "gva/frame_selector.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gva/error.hpp"

namespace gva {

namespace {

constexpr int kSegmentSamples = 32;

std::vector<EntityId> matched_entities(const VideoGraph& graph, const QueryParse& query) {
  std::vector<EntityId> ids;
  for (const auto& m : query.entities) {
    if (auto id = graph.find_entity(m.lemma)) ids.push_back(*id);
  }
  return ids;
}

}  // namespace

void SelectorConfig::validate() const {
  for (double w : {weight_graph, weight_visual, weight_temporal}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Config, "selector weights must be nonnegative");
  }
  if (std::abs(weight_graph + weight_visual + weight_temporal - 1.0) > 1e-9) {
    throw Error(ErrorKind::Config, "selector weights must sum to 1");
  }
  if (k < 1) throw Error(ErrorKind::Config, "selector.k must be >= 1");
  if (!(decay_len > 0.0)) throw Error(ErrorKind::Config, "selector.decay_len must be positive");
  if (!(expanded_decay_multiplier > 0.0)) {
    throw Error(ErrorKind::Config, "selector.expanded_decay_multiplier must be positive");
  }
}

double graph_score_raw(FrameIndex f, const VideoGraph& graph, const QueryParse& query, bool expanded,
                       const SelectorConfig& cfg) {
  const double length = cfg.effective_decay(expanded);
  double sum = 0.0;
  for (auto id : matched_entities(graph, query)) {
    const auto& frames = graph.node(id).frame_indices;
    auto it = std::lower_bound(frames.begin(), frames.end(), f);
    long d = std::numeric_limits<long>::max();
    if (it != frames.end()) d = std::min<long>(d, *it - f);
    if (it != frames.begin()) d = std::min<long>(d, f - *std::prev(it));
    sum += std::exp(-static_cast<double>(d) / length);
  }
  return sum;
}

double visual_score_raw(const Embedding& frame_embedding, const Embedding& query_embedding) {
  if (frame_embedding.size() != query_embedding.size()) {
    throw Error(ErrorKind::Dimension, "visual score: frame embedding has dimension " +
                                          std::to_string(frame_embedding.size()) + ", query has " +
                                          std::to_string(query_embedding.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < frame_embedding.size(); ++i) {
    dot += frame_embedding[i] * query_embedding[i];
    na += frame_embedding[i] * frame_embedding[i];
    nb += query_embedding[i] * query_embedding[i];
  }
  if (na == 0.0 || nb == 0.0) {
    spdlog::debug("visual score: zero-norm embedding, using neutral 0.5");
    return 0.5;
  }
  double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return (1.0 + cos) / 2.0;
}

double temporal_score_raw(FrameIndex f, const std::vector<FrameIndex>& selected, int total_frames) {
  if (total_frames < 1) throw Error(ErrorKind::InvalidArgument, "temporal score: total_frames must be >= 1");
  if (std::binary_search(selected.begin(), selected.end(), f)) return 0.0;
  auto it = std::lower_bound(selected.begin(), selected.end(), f);
  // virtual boundaries just outside the video
  double prev = it == selected.begin() ? -1.0 : *std::prev(it);
  double next = it == selected.end() ? total_frames : *it;
  double gap_length = next - prev - 1.0;
  double center = (prev + next) / 2.0;
  double centrality = 1.0 - std::abs(f - center) / (gap_length / 2.0);
  return gap_length / total_frames * centrality;
}

std::vector<double> normalize_scores(const std::vector<double>& raw) {
  if (raw.empty()) throw Error(ErrorKind::InvalidArgument, "normalize_scores: empty input");
  for (double v : raw) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "normalize_scores: non-finite input");
  }
  auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  double min = *lo, max = *hi;
  std::vector<double> out(raw.size(), 0.5);
  if (max == min) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - min) / (max - min);
  return out;
}

double combined_score(const ScoreComponents& c, const SelectorConfig& cfg) {
  for (double v : {c.graph, c.visual, c.temporal}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidArgument, "combined_score: component outside [0, 1]");
  }
  return cfg.weight_graph * c.graph + cfg.weight_visual * c.visual + cfg.weight_temporal * c.temporal;
}

std::vector<FrameScore> score_candidates(const std::vector<Candidate>& candidates, const VideoGraph& graph,
                                         const QueryParse& query, const std::optional<Embedding>& query_embedding,
                                         const std::vector<FrameIndex>& selected, int total_frames,
                                         const SelectorConfig& cfg, bool expanded) {
  if (candidates.empty()) return {};
  std::vector<double> g, v, t;
  for (const auto& c : candidates) {
    if (std::binary_search(selected.begin(), selected.end(), c.frame_index)) {
      throw Error(ErrorKind::InvalidArgument, "candidate frame " + std::to_string(c.frame_index) + " already selected");
    }
    g.push_back(graph_score_raw(c.frame_index, graph, query, expanded, cfg));
    v.push_back(query_embedding && c.embedding ? visual_score_raw(*c.embedding, *query_embedding) : 0.5);
    t.push_back(temporal_score_raw(c.frame_index, selected, total_frames));
  }
  auto gn = normalize_scores(g), vn = normalize_scores(v), tn = normalize_scores(t);
  std::vector<FrameScore> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    FrameScore s{candidates[i].frame_index, gn[i], vn[i], tn[i], 0.0};
    s.combined = combined_score({s.s_graph, s.s_visual, s.s_temporal}, cfg);
    out.push_back(s);
  }
  return out;
}

std::vector<FrameIndex> select_frames(const std::vector<Candidate>& candidates, const VideoGraph& graph,
                                      const QueryParse& query, const std::optional<Embedding>& query_embedding,
                                      const std::vector<FrameIndex>& selected, int total_frames,
                                      const SelectorConfig& cfg, bool expanded) {
  auto scores = score_candidates(candidates, graph, query, query_embedding, selected, total_frames, cfg, expanded);
  std::sort(scores.begin(), scores.end(), [](const FrameScore& a, const FrameScore& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.frame_index < b.frame_index;
  });
  std::vector<FrameIndex> out;
  for (const auto& s : scores) {
    if (static_cast<int>(out.size()) == cfg.k) break;
    if (std::find(out.begin(), out.end(), s.frame_index) == out.end()) out.push_back(s.frame_index);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Segment> identify_segments(const VideoGraph& graph, const QueryParse& query, int total_frames,
                                       bool expanded, const SelectorConfig& cfg) {
  if (total_frames < 1) throw Error(ErrorKind::InvalidArgument, "identify_segments: total_frames must be >= 1");
  const Segment whole{0, total_frames - 1};
  if (expanded) return {whole};

  std::set<FrameIndex> appearances;
  for (auto id : matched_entities(graph, query)) {
    const auto& frames = graph.node(id).frame_indices;
    appearances.insert(frames.begin(), frames.end());
  }
  if (appearances.empty()) return {whole};

  const double pad = cfg.decay_len;
  std::vector<Segment> clusters;
  for (auto f : appearances) {
    if (!clusters.empty() && f - clusters.back().end <= pad) {
      clusters.back().end = f;
    } else {
      clusters.push_back({f, f});
    }
  }
  std::vector<Segment> windows;
  for (const auto& c : clusters) {
    Segment w{std::max(0, static_cast<FrameIndex>(std::floor(c.start - pad))),
              std::min(total_frames - 1, static_cast<FrameIndex>(std::ceil(c.end + pad)))};
    if (!windows.empty() && w.start <= windows.back().end + 1) {
      windows.back().end = std::max(windows.back().end, w.end);
    } else {
      windows.push_back(w);
    }
  }
  return windows;
}

std::vector<FrameIndex> candidate_frames(const std::vector<Segment>& segments, const std::vector<FrameIndex>& selected,
                                         const std::optional<std::vector<FrameIndex>>& available) {
  std::set<FrameIndex> out;
  for (const auto& seg : segments) {
    if (available) {
      // Only frames that can actually be captioned; subsample those instead.
      auto lo = std::lower_bound(available->begin(), available->end(), seg.start);
      auto hi = std::upper_bound(available->begin(), available->end(), seg.end);
      std::vector<FrameIndex> inside(lo, hi);
      auto stride = std::max<std::size_t>(1, inside.size() / kSegmentSamples);
      for (std::size_t i = 0; i < inside.size(); i += stride) out.insert(inside[i]);
    } else {
      auto stride = std::max(1, seg.length() / kSegmentSamples);
      for (FrameIndex f = seg.start; f <= seg.end; f += stride) out.insert(f);
    }
  }
  for (auto f : selected) out.erase(f);
  return {out.begin(), out.end()};
}

}  // namespace gva
