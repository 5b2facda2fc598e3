// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gva/ingest_store.hpp"
#include "gva/types.hpp"

namespace gva {

enum class ProviderKind { RemoteChat, RemoteEmbed, PrecomputedCaption, PrecomputedEmbed, Scripted };

std::string_view to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(std::string_view name);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Scripted;
  /// Base URL, e.g. http://127.0.0.1:8080. Paths /v1/... are appended.
  std::string endpoint;
  std::string model_name;
  /// Name of the environment variable holding the bearer token; empty = no auth.
  std::string api_key_env;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  /// First retry delay; doubles on each further attempt.
  double backoff_seconds = 0.5;
  /// Script file for Scripted chat/caption providers.
  std::filesystem::path script;
  /// Output dimension for Scripted embeddings.
  std::size_t dimension = 0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Identity used in cache keys.
  std::string id() const;
};

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  /// Agent round this request belongs to (0 when not part of a session).
  int round = 0;
};

/// One entry of a reply script. An entry matches when every condition it
/// carries holds; an entry with no condition is the catch-all.
struct ScriptEntry {
  std::optional<int> round;
  std::vector<std::string> contains;
  std::string reply;

  bool is_catch_all() const { return !round && contains.empty(); }
  bool matches(const ChatRequest& request) const;
};

/// Script format:
///
///   # comments (only before the first entry)
///   == round 1
///   answer: B, confidence: 1
///   == contains "person —take→ toy" "dog —bark→ person"
///   answer: C, confidence: 3
///   == default
///   answer: A, confidence: 1
///
/// Each `==` header starts an entry; its reply is every following line up to
/// the next header, with trailing blank lines removed. Conditions may be
/// combined (`== round 2 contains "x"`). The last entry must be `default`.
std::vector<ScriptEntry> parse_script(std::string_view text);
std::vector<ScriptEntry> load_script(const std::filesystem::path& file);
/// First matching entry's reply.
const std::string& script_reply(const std::vector<ScriptEntry>& script, const ChatRequest& request);

/// Unit vector derived from a seeded hash of `input`; same input, same vector.
Embedding pseudo_embedding(std::string_view input, std::size_t dimension, std::uint64_t seed);

inline ProviderConfig provider_of_kind(ProviderKind kind) {
  ProviderConfig p;
  p.kind = kind;
  return p;
}

struct GatewayConfig {
  ProviderConfig chat;
  ProviderConfig caption = provider_of_kind(ProviderKind::PrecomputedCaption);
  ProviderConfig embed = provider_of_kind(ProviderKind::PrecomputedEmbed);
  bool cache_enabled = true;
  /// Persist cache entries here when non-empty.
  std::filesystem::path cache_dir;
  int max_in_flight = 4;
};

struct GatewayStats {
  std::uint64_t wire_attempts = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
};

using EmbedInput = std::variant<std::string, FrameIndex>;

/// Uniform access to chat, captioning and embedding backends. Thread-safe:
/// the cache is internally locked and remote calls are capped at
/// `max_in_flight` concurrent requests.
class ModelGateway {
 public:
  explicit ModelGateway(GatewayConfig config);
  ~ModelGateway();
  ModelGateway(const ModelGateway&) = delete;
  ModelGateway& operator=(const ModelGateway&) = delete;

  const GatewayConfig& config() const { return config_; }

  std::string chat(const ChatRequest& request);
  std::string chat(const std::vector<ChatMessage>& messages) { return chat(ChatRequest{messages, 0}); }

  /// Throws Error(MissingCaption) when a precomputed table lacks the frame.
  std::string caption(FrameIndex frame, const VideoBundle& bundle);

  /// Text or frame embedding. nullopt when the provider has nothing for this
  /// input (a precomputed table cannot embed free text, or lacks the frame).
  std::optional<Embedding> embed(const EmbedInput& input, const VideoBundle* bundle = nullptr);

  /// Frames the caption provider can serve; nullopt means every frame.
  std::optional<std::vector<FrameIndex>> captionable_frames(const VideoBundle& bundle) const;

  GatewayStats stats() const;

 private:
  std::optional<std::string> cache_get(const std::string& key);
  void cache_put(const std::string& key, const std::string& value);
  std::string cached(const ProviderConfig& provider, const std::string& body,
                     const std::function<std::string()>& compute);
  std::string remote_post(const ProviderConfig& provider, const std::string& path, const std::string& body);
  std::string remote_chat(const ProviderConfig& provider, const std::vector<ChatMessage>& messages);
  const std::vector<ScriptEntry>& script_for(const ProviderConfig& provider);

  GatewayConfig config_;
  std::mutex cache_mutex_;
  std::map<std::string, std::string> cache_;
  std::mutex script_mutex_;
  std::map<std::filesystem::path, std::vector<ScriptEntry>> scripts_;
  std::unique_ptr<std::counting_semaphore<64>> in_flight_;
  std::atomic<std::uint64_t> wire_attempts_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> cache_misses_{0};
};

}  // namespace gva
