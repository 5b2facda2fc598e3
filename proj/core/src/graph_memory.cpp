// SPDX-License-Identifier: Apache-2.0
#include "gva/graph_memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gva/error.hpp"

namespace gva {

namespace {

template <typename T>
bool insert_sorted_unique(std::vector<T>& v, const T& value) {
  auto it = std::lower_bound(v.begin(), v.end(), value);
  if (it != v.end() && *it == value) return false;
  v.insert(it, value);
  return true;
}

// Keeps `v` ordered by frame; entries for the same frame stay in arrival order.
void insert_by_frame(std::vector<std::pair<FrameIndex, std::string>>& v, FrameIndex frame, const std::string& text) {
  auto it = std::upper_bound(v.begin(), v.end(), frame, [](FrameIndex f, const auto& e) { return f < e.first; });
  v.insert(it, {frame, text});
}

bool contains(const std::vector<FrameIndex>& sorted, FrameIndex f) {
  return std::binary_search(sorted.begin(), sorted.end(), f);
}

double cosine(const Embedding& a, const Embedding& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool types_compatible(EntityType a, EntityType b) {
  return a == b || a == EntityType::Unknown || b == EntityType::Unknown;
}

std::string format_frames(const std::vector<FrameIndex>& frames) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < frames.size(); ++i) out << (i ? ", " : "") << frames[i];
  out << ']';
  return out.str();
}

// Observations of `node` at frames <= f; throws when there are none.
std::vector<FrameIndex> observations_upto(const EntityNode& node, FrameIndex f) {
  auto end = std::upper_bound(node.frame_indices.begin(), node.frame_indices.end(), f);
  if (end == node.frame_indices.begin()) {
    throw Error(ErrorKind::UndefinedEntity,
                "entity '" + node.canonical_lemma + "' is not observed at or before frame " + std::to_string(f));
  }
  return {node.frame_indices.begin(), end};
}

}  // namespace

void GraphConfig::validate() const {
  if (!(coherence_alpha >= 0.0 && coherence_alpha <= 1.0)) {
    throw Error(ErrorKind::Config, "graph.coherence_alpha must be in [0, 1]");
  }
  if (window < 1) throw Error(ErrorKind::Config, "graph.window must be >= 1");
  if (!std::isfinite(merge_similarity)) throw Error(ErrorKind::Config, "graph.merge_similarity must be finite");
}

VideoGraph::VideoGraph(GraphConfig config) : config_(config) { config_.validate(); }

const EntityNode& VideoGraph::node(EntityId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::UndefinedEntity, "unknown entity id " + std::to_string(id));
  return it->second;
}

std::optional<EntityId> VideoGraph::find_entity(const std::string& lemma) const {
  for (const auto& [id, n] : nodes_) {
    if (n.answers_to(lemma)) return id;
  }
  return std::nullopt;
}

std::optional<EdgeId> VideoGraph::find_edge(EntityId src, const std::string& predicate, EntityId dst) const {
  for (const auto& [id, e] : edges_) {
    if (e.src == src && e.dst == dst && e.predicate == predicate) return id;
  }
  return std::nullopt;
}

EntityId VideoGraph::upsert_entity(const Mention& mention, FrameIndex frame, const std::optional<Embedding>& embedding,
                                   const std::string& snippet) {
  if (mention.lemma.empty()) throw Error(ErrorKind::InvalidArgument, "upsert_entity: empty lemma");
  if (frame < 0) throw Error(ErrorKind::InvalidArgument, "upsert_entity: negative frame");
  if (embedding) {
    if (embedding->empty() || (embedding_dim_ != 0 && embedding->size() != embedding_dim_)) {
      throw Error(ErrorKind::Dimension, "embedding for '" + mention.lemma + "' has dimension " +
                                            std::to_string(embedding->size()) + ", graph uses " +
                                            std::to_string(embedding_dim_));
    }
  }

  auto id = find_entity(mention.lemma);
  if (!id && embedding && config_.merge_similarity <= 1.0) {
    double best = -2.0;
    for (const auto& [nid, n] : nodes_) {
      if (!n.feature || !types_compatible(n.entity_type, mention.entity_type)) continue;
      if (contains(n.frame_indices, frame)) continue;  // two lemmas in one frame are two entities
      double sim = cosine(*n.feature, *embedding);
      if (sim >= config_.merge_similarity && sim > best) {
        best = sim;
        id = nid;
      }
    }
    if (id) nodes_[*id].aliases.insert(mention.lemma);
  }
  if (!id) {
    id = next_entity_id_++;
    EntityNode fresh;
    fresh.id = *id;
    fresh.canonical_lemma = mention.lemma;
    fresh.entity_type = mention.entity_type;
    nodes_.emplace(*id, std::move(fresh));
  }

  auto& n = nodes_[*id];
  if (n.entity_type == EntityType::Unknown) n.entity_type = mention.entity_type;
  if (!insert_sorted_unique(n.frame_indices, frame)) return *id;

  if (embedding) {
    if (!n.feature) n.feature = Embedding(embedding->size(), 0.0);
    ++n.feature_count;
    auto& feat = *n.feature;
    for (std::size_t i = 0; i < feat.size(); ++i) feat[i] += ((*embedding)[i] - feat[i]) / n.feature_count;
    embedding_dim_ = embedding->size();
  }
  if (!snippet.empty()) insert_by_frame(n.caption_snippets, frame, snippet);
  return *id;
}

EdgeId VideoGraph::upsert_edge(EntityId src, EntityId dst, RelationCategory category, const std::string& predicate,
                               FrameIndex frame) {
  if (src == dst) throw Error(ErrorKind::InvalidArgument, "upsert_edge: self loop on '" + predicate + "'");
  node(src);
  node(dst);
  auto id = find_edge(src, predicate, dst);
  if (!id) {
    id = next_edge_id_++;
    edges_.emplace(*id, RelationEdge{*id, src, dst, category, predicate, {}});
  }
  insert_sorted_unique(edges_[*id].frame_indices, frame);
  return *id;
}

void VideoGraph::add_state_event(EntityId id, FrameIndex frame, const std::string& state) {
  node(id);
  auto& n = nodes_[id];
  if (!contains(n.frame_indices, frame)) {
    throw Error(ErrorKind::InvalidArgument, "state event for '" + n.canonical_lemma + "' at unobserved frame " +
                                                std::to_string(frame));
  }
  std::pair<FrameIndex, std::string> ev{frame, state};
  if (std::find(n.state_history.begin(), n.state_history.end(), ev) != n.state_history.end()) return;
  insert_by_frame(n.state_history, frame, state);
}

VideoGraph VideoGraph::from_parts(GraphConfig config, std::uint64_t version, std::size_t embedding_dim,
                                  std::map<EntityId, EntityNode> nodes, std::map<EdgeId, RelationEdge> edges,
                                  std::set<FrameIndex> processed_frames) {
  VideoGraph g(config);
  g.version_ = version;
  g.embedding_dim_ = embedding_dim;
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.processed_frames_ = std::move(processed_frames);
  g.next_entity_id_ = g.nodes_.empty() ? 1 : g.nodes_.rbegin()->first + 1;
  g.next_edge_id_ = g.edges_.empty() ? 1 : g.edges_.rbegin()->first + 1;
  g.check_invariants();
  return g;
}

void VideoGraph::check_invariants() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Data, "graph invariant violated: " + what); };
  auto processed = [&](FrameIndex f) { return processed_frames_.count(f) > 0; };

  for (const auto& [id, n] : nodes_) {
    if (n.id != id) fail("node key/id mismatch for " + std::to_string(id));
    if (n.canonical_lemma.empty()) fail("node " + std::to_string(id) + " has empty lemma");
    if (!std::is_sorted(n.frame_indices.begin(), n.frame_indices.end()) ||
        std::adjacent_find(n.frame_indices.begin(), n.frame_indices.end()) != n.frame_indices.end()) {
      fail("node " + n.canonical_lemma + " frame indices not strictly increasing");
    }
    for (auto f : n.frame_indices) {
      if (!processed(f)) fail("node " + n.canonical_lemma + " references unprocessed frame " + std::to_string(f));
    }
    for (const auto& [f, s] : n.state_history) {
      if (!contains(n.frame_indices, f)) fail("state of " + n.canonical_lemma + " at unobserved frame");
    }
    if (!std::is_sorted(n.state_history.begin(), n.state_history.end(),
                        [](const auto& a, const auto& b) { return a.first < b.first; })) {
      fail("state history of " + n.canonical_lemma + " not sorted");
    }
    if (n.feature && n.feature->size() != embedding_dim_) fail("feature dimension of " + n.canonical_lemma);
  }
  for (const auto& [id, e] : edges_) {
    if (e.id != id) fail("edge key/id mismatch for " + std::to_string(id));
    if (e.src == e.dst) fail("edge " + std::to_string(id) + " is a self loop");
    if (!nodes_.count(e.src) || !nodes_.count(e.dst)) fail("edge " + std::to_string(id) + " dangling");
    for (auto f : e.frame_indices) {
      if (!processed(f)) fail("edge " + e.predicate + " references unprocessed frame " + std::to_string(f));
    }
    if (!std::is_sorted(e.frame_indices.begin(), e.frame_indices.end())) fail("edge frames not sorted");
  }
}

EntityId upsert_entity(VideoGraph& graph, const Mention& mention, FrameIndex frame,
                       const std::optional<Embedding>& embedding) {
  return graph.upsert_entity(mention, frame, embedding);
}

VideoGraph update_graph(const VideoGraph& graph, const std::vector<FrameRecord>& new_records,
                        const std::vector<CaptionParse>& parses) {
  if (new_records.size() != parses.size()) {
    throw Error(ErrorKind::InvalidArgument, "update_graph: " + std::to_string(new_records.size()) + " records but " +
                                                std::to_string(parses.size()) + " parses");
  }
  std::set<FrameIndex> batch;
  for (std::size_t i = 0; i < new_records.size(); ++i) {
    auto f = new_records[i].frame_index;
    if (parses[i].frame_index != f) {
      throw Error(ErrorKind::InvalidArgument, "update_graph: parse for frame " + std::to_string(parses[i].frame_index) +
                                                  " paired with record for frame " + std::to_string(f));
    }
    if (graph.processed_frames().count(f) || !batch.insert(f).second) {
      throw Error(ErrorKind::InvalidArgument, "update_graph: frame " + std::to_string(f) + " already processed");
    }
  }

  std::vector<std::size_t> order(new_records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return new_records[a].frame_index < new_records[b].frame_index; });

  VideoGraph next = graph;
  for (auto i : order) {
    const auto& rec = new_records[i];
    const auto& parse = parses[i];
    next.mark_processed(rec.frame_index);

    std::map<std::string, EntityId> ids;
    for (const auto& m : parse.mentions) {
      ids[m.lemma] = next.upsert_entity(m, rec.frame_index, rec.embedding, rec.caption);
    }
    auto id_of = [&](const Mention& m) {
      auto it = ids.find(m.lemma);
      return it != ids.end() ? it->second : next.upsert_entity(m, rec.frame_index, rec.embedding, rec.caption);
    };
    for (const auto& t : parse.triples) {
      auto src = id_of(t.subject);
      auto dst = id_of(t.object);
      if (src != dst) next.upsert_edge(src, dst, t.category, t.predicate, rec.frame_index);
    }
    for (const auto& ev : parse.state_events) next.add_state_event(id_of(ev.mention), rec.frame_index, ev.state);
  }
  next.bump_version();
  return next;
}

std::string effective_state(const EntityNode& node, FrameIndex frame) {
  std::string state = "neutral";
  for (const auto& [f, label] : node.state_history) {
    if (f > frame) break;
    state = label;
  }
  return state;
}

double state_consistency(const VideoGraph& graph, EntityId id, FrameIndex f) {
  const auto& n = graph.node(id);
  auto obs = observations_upto(n, f);
  auto window = static_cast<std::size_t>(graph.config().window);
  if (obs.size() > window) obs.erase(obs.begin(), obs.end() - static_cast<std::ptrdiff_t>(window));
  if (obs.size() < 2) return 1.0;

  auto reference = effective_state(n, f);
  auto matches = std::count_if(obs.begin(), obs.end(), [&](FrameIndex o) { return effective_state(n, o) == reference; });
  return static_cast<double>(matches) / static_cast<double>(obs.size());
}

double relation_persistence(const VideoGraph& graph, EntityId id, FrameIndex f) {
  const auto& n = graph.node(id);
  observations_upto(n, f);

  const auto& processed = graph.processed_frames();
  std::vector<FrameIndex> window(processed.begin(), processed.lower_bound(f));
  auto w = static_cast<std::size_t>(graph.config().window);
  if (window.size() > w) window.erase(window.begin(), window.end() - static_cast<std::ptrdiff_t>(w));

  int at_f = 0;
  int persisted = 0;
  for (const auto& [eid, e] : graph.edges()) {
    if ((e.src != id && e.dst != id) || !contains(e.frame_indices, f)) continue;
    ++at_f;
    bool seen = std::any_of(window.begin(), window.end(), [&](FrameIndex p) { return contains(e.frame_indices, p); });
    persisted += seen ? 1 : 0;
  }
  return at_f == 0 ? 0.0 : static_cast<double>(persisted) / at_f;
}

double temporal_coherence(const VideoGraph& graph, EntityId id, FrameIndex f) {
  double alpha = graph.config().coherence_alpha;
  return alpha * state_consistency(graph, id, f) + (1.0 - alpha) * relation_persistence(graph, id, f);
}

std::vector<FrameIndex> appearance_intervals(const VideoGraph& graph, EntityId id) {
  return graph.node(id).frame_indices;
}

GraphSummary summarize(const VideoGraph& graph, const QueryParse& query, std::size_t char_budget) {
  if (char_budget < kMinSummaryBudget) {
    throw Error(ErrorKind::InvalidArgument, "summarize: char_budget must be >= " + std::to_string(kMinSummaryBudget));
  }

  auto in_query = [&](const EntityNode& n) {
    if (query.mentions_lemma(n.canonical_lemma)) return true;
    return std::any_of(n.aliases.begin(), n.aliases.end(), [&](const auto& a) { return query.mentions_lemma(a); });
  };
  auto predicate_in_query = [&](const std::string& p) {
    return std::any_of(query.predicates.begin(), query.predicates.end(), [&](const auto& q) { return q.first == p; });
  };

  std::vector<const EntityNode*> ranked;
  for (const auto& [id, n] : graph.nodes()) ranked.push_back(&n);
  std::sort(ranked.begin(), ranked.end(), [&](const EntityNode* a, const EntityNode* b) {
    bool qa = in_query(*a), qb = in_query(*b);
    if (qa != qb) return qa;
    if (a->frame_indices.size() != b->frame_indices.size()) return a->frame_indices.size() > b->frame_indices.size();
    return a->canonical_lemma < b->canonical_lemma;
  });

  std::vector<std::string> entity_lines;
  for (const auto* n : ranked) {
    std::string line = n->canonical_lemma;
    for (const auto& a : n->aliases) line += "/" + a;
    line += " (" + std::string(to_string(n->entity_type)) + ") @ frames " + format_frames(n->frame_indices);
    entity_lines.push_back(std::move(line));
  }

  std::vector<const RelationEdge*> edges;
  for (const auto& [id, e] : graph.edges()) edges.push_back(&e);
  auto edge_score = [&](const RelationEdge& e) {
    return int(in_query(graph.node(e.src))) + int(in_query(graph.node(e.dst))) + int(predicate_in_query(e.predicate));
  };
  std::sort(edges.begin(), edges.end(), [&](const RelationEdge* a, const RelationEdge* b) {
    int sa = edge_score(*a), sb = edge_score(*b);
    if (sa != sb) return sa > sb;
    if (a->frame_indices.front() != b->frame_indices.front()) return a->frame_indices.front() < b->frame_indices.front();
    return a->id < b->id;
  });
  std::vector<std::string> relation_lines;
  for (const auto* e : edges) {
    relation_lines.push_back(graph.node(e->src).canonical_lemma + " —" + e->predicate + "→ " +
                             graph.node(e->dst).canonical_lemma + " @ frames " + format_frames(e->frame_indices));
  }

  std::vector<std::string> temporal_lines;
  for (const auto* n : ranked) {
    if (n->state_history.empty()) continue;
    std::vector<std::pair<std::string, FrameIndex>> chain;
    FrameIndex first = n->frame_indices.front();
    chain.emplace_back(effective_state(*n, first), first);
    for (const auto& [f, label] : n->state_history) {
      if (f > first && chain.back().first != label) chain.emplace_back(label, f);
    }
    std::string line = n->canonical_lemma + ": ";
    for (std::size_t i = 0; i < chain.size(); ++i) {
      line += (i ? " → " : "") + chain[i].first + "@" + std::to_string(chain[i].second);
    }
    temporal_lines.push_back(std::move(line));
  }

  const bool had[3] = {!entity_lines.empty(), !relation_lines.empty(), !temporal_lines.empty()};
  auto render = [](const std::vector<std::string>& lines, bool had_any, const char* placeholder) {
    if (lines.empty()) return std::string(had_any ? "(omitted for length)" : placeholder);
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) out += (i ? "\n" : "") + lines[i];
    return out;
  };
  auto build = [&] {
    return GraphSummary{render(entity_lines, had[0], "(no entities observed)"),
                        render(relation_lines, had[1], "(no relations observed)"),
                        render(temporal_lines, had[2], "(no state changes observed)")};
  };

  auto summary = build();
  while (summary.total_size() > char_budget) {
    // drop from the longest list; on ties the temporal section yields first, then relations
    std::vector<std::string>* victim = &temporal_lines;
    if (relation_lines.size() > victim->size()) victim = &relation_lines;
    if (entity_lines.size() > victim->size()) victim = &entity_lines;
    if (victim->empty()) break;
    victim->pop_back();
    summary = build();
  }
  return summary;
}

}  // namespace gva
