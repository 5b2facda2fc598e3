// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gva/config.hpp"
#include "gva/ingest_store.hpp"
#include "gva/session.hpp"

namespace gva {

/// Graph-derived bucket: <=3 nodes Few, 4-6 Mid, >=7 Many. A bucket annotated
/// in the dataset always wins.
EntityBucket bucket_by_entity_count(std::size_t node_count, std::optional<EntityBucket> dataset_bucket = std::nullopt);

struct EvalReport {
  std::size_t n_items = 0;
  /// Sessions that completed without error.
  std::size_t answered = 0;
  /// Completed sessions with a known answer, and how many of those were right.
  std::size_t scored = 0;
  std::size_t correct = 0;
  double accuracy = 0;
  double mean_frames_used = 0;
  double mean_rounds = 0;
  /// Accuracy per key; only keys present among scored items appear.
  std::map<std::string, double> per_category;
  std::map<std::string, double> per_bucket;
  /// (item id, note) for every item whose session errored or never started.
  std::vector<std::pair<std::string, std::string>> failures;

  std::string to_json() const;
  std::string to_text() const;
};

/// Aggregates finished sessions; `sessions[i]` belongs to `items[i]`. A session
/// with a non-empty `error` counts as a failure.
EvalReport build_report(const std::vector<QAItem>& items, const std::vector<AgentSession>& sessions);

struct EvalOptions {
  std::filesystem::path qa_file;
  /// Either a directory of bundles named by video id, or a single bundle.
  std::filesystem::path bundle_root;
  /// Receives transcripts.jsonl, report.json and report.txt. Empty = no files.
  std::filesystem::path out_dir;
  int parallel = 1;
};

struct EvalResult {
  EvalReport report;
  std::vector<AgentSession> sessions;
  /// Sessions cut short because a provider exhausted its retries.
  std::size_t gateway_failures = 0;
};

/// Runs every QA item through the agent with a bounded worker pool. Output
/// files are written in item order regardless of completion order, so a fixed
/// config and a deterministic gateway give byte-identical results.
EvalResult run_eval(const EvalOptions& options, const RunConfig& config);

inline constexpr const char* kTranscriptFile = "transcripts.jsonl";
inline constexpr const char* kReportJsonFile = "report.json";
inline constexpr const char* kReportTextFile = "report.txt";

}  // namespace gva
