// SPDX-License-Identifier: Apache-2.0
// Shared fixtures and independent oracles for the unit and acceptance tests.
#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "gva/caption_parser.hpp"
#include "gva/frame_selector.hpp"
#include "gva/graph_memory.hpp"
#include "gva/ingest_store.hpp"
#include "gva/session.hpp"

namespace httplib {
class Server;
}

namespace gva::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// Graph built from the three dog/toy/person captions at frames 0, 1, 2.
VideoGraph dog_toy_graph(const Lexicon& lex = Lexicon::builtin());
inline const std::vector<std::string> kDogToyCaptions = {"the dog plays with the toy", "the person takes the toy",
                                                       "the dog barks at the person"};

/// Parses and integrates captions into `graph`, one frame per caption.
VideoGraph ingest(const VideoGraph& graph, const std::vector<std::pair<FrameIndex, std::string>>& captions,
                  const Lexicon& lex = Lexicon::builtin());

// ---------------------------------------------------------------------------
// Oracles

/// Isomorphism check that ignores ids: nodes keyed by canonical lemma, edges
/// by (src lemma, predicate, dst lemma). Compares every other field.
bool structurally_equal(const VideoGraph& a, const VideoGraph& b, std::string* why = nullptr);

/// Brute-force selection: recompute every score from the definitions, sort
/// all candidates, take k. Shares no code with the selector.
std::vector<FrameIndex> brute_force_select(const std::vector<FrameIndex>& candidates,
                                           const std::vector<std::vector<double>>& candidate_embeddings,
                                           const std::vector<std::vector<FrameIndex>>& query_entity_frames,
                                           const std::vector<double>* query_embedding,
                                           const std::vector<FrameIndex>& selected, int total_frames,
                                           double w_graph, double w_visual, double w_temporal, int k,
                                           double decay_len);

struct SelectionInstance {
  VideoGraph graph;
  QueryParse query;
  std::vector<Candidate> candidates;
  std::optional<Embedding> query_embedding;
  std::vector<FrameIndex> selected;
  int total_frames = 0;
  SelectorConfig config;
};
/// Random selector input with at most `max_candidates` candidates; coarse
/// values make exact score ties common.
SelectionInstance random_selection_instance(std::mt19937& rng, std::size_t max_candidates);
std::vector<FrameIndex> oracle_select(const SelectionInstance& instance);

/// Windowed-fraction recompute of temporal coherence from raw event lists.
struct EntityHistory {
  std::vector<FrameIndex> observations;                     // sorted
  std::vector<std::pair<FrameIndex, std::string>> states;  // sorted by frame
  /// Frames at which each incident edge was observed.
  std::vector<std::vector<FrameIndex>> incident_edges;
};
double coherence_oracle(const EntityHistory& h, const std::vector<FrameIndex>& processed, FrameIndex f, int window,
                        double alpha);

// ---------------------------------------------------------------------------
// Random data

/// A random caption drawn from the built-in vocabulary; may contain non-ASCII words.
std::string random_caption(std::mt19937& rng, bool unicode);
Embedding random_unit_vector(std::mt19937& rng, std::size_t dim);
/// Random graph built through the public API: captions, optional embeddings.
VideoGraph random_graph(std::mt19937& rng, std::size_t dim, bool unicode);
VideoBundle random_bundle(std::mt19937& rng, std::size_t dim, bool unicode);

// ---------------------------------------------------------------------------
// Scripted causal-chain suite: ten questions, each answerable only when the
// graph holds both "X takes O" and "Y <verb> X".

struct CausalSuite {
  fs::path root;
  fs::path bundles;
  fs::path qa;
  fs::path config;               // full graph
  fs::path config_no_relations;  // relation extraction disabled
  std::vector<QAItem> items;
};
CausalSuite write_causal_suite(const fs::path& root);

// ---------------------------------------------------------------------------
// Local HTTP stub

struct StubReply {
  int status = 200;
  std::string body;
};

/// Serves POST /v1/chat/completions and /v1/embeddings from a queue of
/// replies (the last one repeats) and records every request body.
class StubServer {
 public:
  explicit StubServer(std::vector<StubReply> replies);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_.load(); }
  std::vector<std::string> bodies() const;
  std::vector<std::string> auth_headers() const;

  static std::string chat_body(const std::string& content);
  static std::string embedding_body(const std::vector<double>& v);

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<StubReply> replies_;
  std::atomic<int> requests_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

}  // namespace gva::testing
