// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gva/caption_parser.hpp"
#include "gva/frame_selector.hpp"
#include "gva/graph_memory.hpp"
#include "gva/ingest_store.hpp"
#include "gva/model_gateway.hpp"
#include "gva/session.hpp"

namespace gva {

struct AgentConfig {
  /// Frames sampled uniformly before the first round.
  int initial_frames = 5;
  int max_rounds = 3;
  /// Confidence at or above which the agent answers (scale 1..3).
  int confidence_threshold = 3;
  SelectorConfig selector;
  GraphConfig graph;
  /// Byte budget for the three graph summary sections in the prompt.
  std::size_t prompt_char_budget = 6000;
  /// Ablation switch: when false, relation triples are discarded before they
  /// reach the graph.
  bool extract_relations = true;
  /// Template text; empty selects data/prompts/answer.txt.
  std::string prompt_template;

  void validate() const;
  /// Upper bound on frames a session may caption: N + k * (max_rounds - 1).
  int frame_budget() const { return initial_frames + selector.k * (max_rounds - 1); }
};

/// `count` evenly spaced indices round((i + 0.5) * total / count), clamped and
/// deduplicated. Asking for more frames than exist returns every frame.
std::vector<FrameIndex> uniform_sample(int total_frames, int count);

Action decide_action(int confidence, int round, const AgentConfig& cfg);

struct ParsedReply {
  int prediction = 0;
  int confidence = 1;
  std::string missing_info;
};

/// Extracts `answer: <letter>`, `confidence: <1-3>` and an optional
/// `missing: ...` line. nullopt when answer or confidence is absent/invalid.
std::optional<ParsedReply> parse_reply(std::string_view reply, std::size_t option_count);

/// Replaces {question}, {options}, {frame_captions}, {entity_summary},
/// {relation_summary} and {temporal_summary}. Unknown placeholders are kept.
std::string render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string format_options(const std::vector<std::string>& options);
std::string format_captions(const std::map<FrameIndex, std::string>& captions);

inline constexpr const char* kUnparseableReply = "unparseable reply";

struct Evaluation {
  int prediction = 0;
  int confidence = 1;
  std::string missing_info;
  std::string prompt;
  std::string prompt_digest;
};

/// Everything a session carries between rounds.
struct AgentState {
  const VideoBundle* bundle = nullptr;
  AgentSession session;
  VideoGraph graph;
  QueryParse query;
  std::optional<Embedding> query_embedding;
  std::map<FrameIndex, std::string> captions;
  std::optional<std::vector<FrameIndex>> available_frames;
};

struct AgentRun {
  AgentSession session;
  VideoGraph graph;
};

/// Iterative predict / self-reflect / retrieve loop. One Agent may serve many
/// sessions concurrently; each session itself is sequential.
class Agent {
 public:
  Agent(AgentConfig config, ModelGateway& gateway, const Lexicon& lexicon = Lexicon::builtin());

  const AgentConfig& config() const { return config_; }

  /// Uniform sampling, captioning, parsing and the first graph update.
  AgentState start(const VideoBundle& bundle, const std::string& question, const std::vector<std::string>& options);
  Evaluation evaluate_state(const AgentState& state);
  /// Runs one round. Does nothing on a terminated session.
  void run_round(AgentState& state);
  AgentRun run(const VideoBundle& bundle, const std::string& question, const std::vector<std::string>& options);

  /// Captions, parses and integrates `frames` (one graph version step).
  void integrate_frames(AgentState& state, const std::vector<FrameIndex>& frames);

 private:
  void finish(AgentState& state, int answer, Termination how);

  AgentConfig config_;
  ModelGateway& gateway_;
  const Lexicon& lexicon_;
  std::string template_;
};

}  // namespace gva
