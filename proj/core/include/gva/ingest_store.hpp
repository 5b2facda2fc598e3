// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gva/graph_memory.hpp"
#include "gva/session.hpp"
#include "gva/types.hpp"

namespace gva {

/// On-disk bundle layout (all UTF-8):
///
///   manifest.json    {"video_id", "total_frames", "fps"?, "embedding_dim"?}
///   captions.tsv     <frame>\t<caption>        (\n, \t and \\ escaped)
///   embeddings.tsv   <frame>\t<f1> <f2> ...    (shortest round-trip decimals)
///   qa.jsonl         optional, one QAItem per line
struct VideoBundle {
  std::string video_id;
  int total_frames = 0;
  std::optional<double> fps;
  /// 0 when the bundle carries no embeddings.
  std::size_t embedding_dim = 0;
  std::map<FrameIndex, std::string> captions;
  std::map<FrameIndex, Embedding> embeddings;

  void validate() const;
  bool operator==(const VideoBundle&) const = default;
};

enum class QACategory { Causal, Temporal, Descriptive };
/// Entity-count buckets: 2-3, 4-6 and 7+ entities.
enum class EntityBucket { Few, Mid, Many };

std::string_view to_string(QACategory category);
std::string_view to_string(EntityBucket bucket);
QACategory qa_category_from_string(std::string_view name);
EntityBucket entity_bucket_from_string(std::string_view name);

struct QAItem {
  std::string id;
  std::string video_id;
  std::string question;
  std::vector<std::string> options;
  std::optional<int> answer_index;
  std::optional<QACategory> category;
  std::optional<EntityBucket> entity_bucket;

  bool operator==(const QAItem&) const = default;
};

inline constexpr std::size_t kMaxOptions = 5;

struct BundleLoadOptions {
  /// Skip embeddings.tsv entirely (caption-only runs on large bundles).
  bool load_embeddings = true;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCaptionsFile = "captions.tsv";
inline constexpr const char* kEmbeddingsFile = "embeddings.tsv";
inline constexpr const char* kQAFile = "qa.jsonl";

VideoBundle load_bundle(const std::filesystem::path& directory, const BundleLoadOptions& options = {});
void save_bundle(const VideoBundle& bundle, const std::filesystem::path& directory);

/// QA records, one JSON object per line:
/// {"id"?, "video_id", "question", "options": [...], "answer"?, "category"?, "entity_bucket"?}
std::vector<QAItem> load_qa(const std::filesystem::path& file);
std::string qa_to_line(const QAItem& item);

inline constexpr int kGraphSchemaVersion = 1;

std::string save_graph(const VideoGraph& graph);
/// Throws Error(SchemaVersion) for a payload written by another schema and
/// Error(Parse) for anything truncated or malformed.
VideoGraph load_graph(std::string_view payload);

std::string transcript_to_line(const AgentSession& session);
AgentSession transcript_from_line(std::string_view line);

/// Appends one JSON line. Concurrent callers are serialised per process.
void save_transcript(const AgentSession& session, const std::filesystem::path& file);
std::vector<AgentSession> load_transcripts(const std::filesystem::path& file);
std::optional<AgentSession> find_transcript(const std::filesystem::path& file, std::string_view video_id,
                                            std::string_view question_hash);

}  // namespace gva
