// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gva/types.hpp"

namespace gva {

enum class Action { Answer, Retrieve, RetrieveExpanded };
enum class Termination { Confident, RoundLimit, Exhausted };

std::string_view to_string(Action action);
std::string_view to_string(Termination termination);
Action action_from_string(std::string_view name);
Termination termination_from_string(std::string_view name);

/// One evaluate-decide-update step. `frames_added` holds the frames retrieved
/// because of this round's decision (empty when the round answered).
struct RoundLog {
  int round = 1;
  std::vector<FrameIndex> frames_added;
  int prediction = 0;
  int confidence = 1;
  std::string missing_info;
  std::string prompt_digest;
  Action action = Action::Answer;

  bool operator==(const RoundLog&) const = default;
};

struct AgentSession {
  std::string video_id;
  std::string question;
  std::vector<std::string> options;
  std::vector<FrameIndex> initial_frames;
  /// Sorted, unique.
  std::vector<FrameIndex> selected_frames;
  std::vector<RoundLog> rounds;
  std::optional<int> final_answer;
  std::optional<Termination> terminated_by;
  std::uint64_t graph_version = 0;
  std::size_t entity_count = 0;
  /// Set when the session was cut short by a provider failure.
  std::string error;

  bool terminated() const { return terminated_by.has_value(); }
  std::size_t frames_used() const { return selected_frames.size(); }
  bool operator==(const AgentSession&) const = default;
};

/// Stable key for a question: SHA-256 over the question and its options.
std::string question_hash(std::string_view question, const std::vector<std::string>& options);

}  // namespace gva
