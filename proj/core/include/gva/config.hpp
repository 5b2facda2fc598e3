// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "gva/agent_core.hpp"
#include "gva/model_gateway.hpp"

namespace gva {

/// Directory holding lexicon/ and prompts/. Resolution order: $GVA_DATA_DIR,
/// the source tree (for uninstalled builds), then the install prefix.
std::filesystem::path default_data_dir();

/// Everything a `gva run` / `gva eval` invocation needs, loaded from one JSON
/// document:
///
///   {
///     "agent":     {"initial_frames", "max_rounds", "confidence_threshold",
///                   "prompt_char_budget", "extract_relations", "prompt_template"},
///     "selector":  {"weight_graph", "weight_visual", "weight_temporal", "k",
///                   "decay_len", "expanded_decay_multiplier"},
///     "graph":     {"coherence_alpha", "window", "merge_similarity"},
///     "providers": {"<name>": {"kind", "endpoint", "model_name", "api_key_env",
///                              "timeout_seconds", "max_retries", "temperature",
///                              "backoff_seconds", "script", "dimension", "seed"}},
///     "chat_provider", "caption_provider", "embed_provider",
///     "cache": {"enabled", "dir"}, "max_in_flight", "lexicon_dir"
///   }
///
/// Every key is optional; unknown keys are rejected. Relative paths resolve
/// against the config file's directory. `agent.prompt_template` is a file path.
struct RunConfig {
  AgentConfig agent;
  std::map<std::string, ProviderConfig> providers;
  std::string chat_provider;
  /// Empty selects the bundle's precomputed captions / embeddings.
  std::string caption_provider;
  std::string embed_provider;
  bool cache_enabled = true;
  std::filesystem::path cache_dir;
  int max_in_flight = 4;
  /// Empty selects the built-in lexicon.
  std::filesystem::path lexicon_dir;

  void validate() const;
  GatewayConfig gateway_config() const;
  /// Points the chat role at provider `name`; throws Config if unknown.
  void use_chat_provider(const std::string& name);
  /// Overrides the seed of every provider.
  void set_seed(std::uint64_t seed);
};

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace gva
