// SPDX-License-Identifier: Apache-2.0
#include "gva/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <thread>
#include <variant>

#include "gva/agent_core.hpp"
#include "gva/error.hpp"

namespace gva {

namespace fs = std::filesystem;

EntityBucket bucket_by_entity_count(std::size_t node_count, std::optional<EntityBucket> dataset_bucket) {
  if (dataset_bucket) return *dataset_bucket;
  if (node_count <= 3) return EntityBucket::Few;
  if (node_count <= 6) return EntityBucket::Mid;
  return EntityBucket::Many;
}

EvalReport build_report(const std::vector<QAItem>& items, const std::vector<AgentSession>& sessions) {
  if (items.size() != sessions.size()) {
    throw Error(ErrorKind::InvalidArgument, "build_report: " + std::to_string(items.size()) + " items but " +
                                                std::to_string(sessions.size()) + " sessions");
  }
  EvalReport r;
  r.n_items = items.size();
  std::size_t frames = 0, rounds = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> cat, bucket;  // key -> (correct, scored)
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto& s = sessions[i];
    if (!s.error.empty() || !s.final_answer) {
      r.failures.emplace_back(item.id, s.error.empty() ? "session did not finish" : s.error);
      continue;
    }
    ++r.answered;
    frames += s.frames_used();
    rounds += s.rounds.size();
    if (!item.answer_index) continue;
    const bool ok = *s.final_answer == *item.answer_index;
    ++r.scored;
    r.correct += ok;
    if (item.category) {
      auto& c = cat[std::string(to_string(*item.category))];
      c.first += ok;
      ++c.second;
    }
    auto& b = bucket[std::string(to_string(bucket_by_entity_count(s.entity_count, item.entity_bucket)))];
    b.first += ok;
    ++b.second;
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  r.accuracy = ratio(r.correct, r.scored);
  r.mean_frames_used = ratio(frames, r.answered);
  r.mean_rounds = ratio(rounds, r.answered);
  for (const auto& [k, v] : cat) r.per_category[k] = ratio(v.first, v.second);
  for (const auto& [k, v] : bucket) r.per_bucket[k] = ratio(v.first, v.second);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json failures_json = nlohmann::json::array();
  for (const auto& [id, note] : failures) failures_json.push_back({{"id", id}, {"error", note}});
  nlohmann::json j = {{"n_items", n_items},
                      {"answered", answered},
                      {"scored", scored},
                      {"correct", correct},
                      {"accuracy", accuracy},
                      {"mean_frames_used", mean_frames_used},
                      {"mean_rounds", mean_rounds},
                      {"per_category", per_category},
                      {"per_bucket", per_bucket},
                      {"failures", failures_json}};
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "items            " << n_items << "\n";
  out << "answered         " << answered << "\n";
  out << "accuracy         " << accuracy << "  (" << correct << "/" << scored << ")\n";
  out << "mean frames used " << mean_frames_used << "\n";
  out << "mean rounds      " << mean_rounds << "\n";
  if (!per_category.empty()) {
    out << "by category\n";
    for (const auto& [k, v] : per_category) out << "  " << std::left << std::setw(14) << k << v << "\n";
  }
  if (!per_bucket.empty()) {
    out << "by entity count\n";
    for (const auto& [k, v] : per_bucket) out << "  " << std::left << std::setw(14) << k << v << "\n";
  }
  if (!failures.empty()) {
    out << "failures         " << failures.size() << "\n";
    for (const auto& [id, note] : failures) out << "  " << id << ": " << note << "\n";
  }
  return out.str();
}

namespace {

fs::path bundle_dir(const fs::path& root, const std::string& video_id) {
  if (fs::exists(root / kManifestFile)) return root;
  return root / video_id;
}

AgentSession stub_session(const QAItem& item, std::string error) {
  AgentSession s;
  s.video_id = item.video_id;
  s.question = item.question;
  s.options = item.options;
  s.error = std::move(error);
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace

EvalResult run_eval(const EvalOptions& options, const RunConfig& config) {
  if (options.parallel < 1) throw Error(ErrorKind::Config, "parallel must be >= 1");
  const auto items = load_qa(options.qa_file);
  spdlog::info("loaded {} questions from {}", items.size(), options.qa_file.string());

  std::map<std::string, std::variant<VideoBundle, std::string>> bundles;
  for (const auto& item : items) {
    if (bundles.count(item.video_id)) continue;
    auto dir = bundle_dir(options.bundle_root, item.video_id);
    try {
      auto b = load_bundle(dir);
      if (b.video_id != item.video_id) {
        throw Error(ErrorKind::Data, dir.string() + " holds video '" + b.video_id + "', not '" + item.video_id + "'");
      }
      bundles.emplace(item.video_id, std::move(b));
    } catch (const Error& e) {
      spdlog::warn("{}", e.what());
      bundles.emplace(item.video_id, std::string(e.what()));
    }
  }

  const Lexicon lexicon = config.lexicon_dir.empty() ? Lexicon::builtin() : Lexicon::load(config.lexicon_dir);
  ModelGateway gateway(config.gateway_config());
  Agent agent(config.agent, gateway, lexicon);

  std::vector<AgentSession> sessions(items.size());
  std::vector<char> gateway_failed(items.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      const auto& item = items[i];
      auto& s = sessions[i];
      const auto& entry = bundles.at(item.video_id);
      if (const auto* err = std::get_if<std::string>(&entry)) {
        s = stub_session(item, *err);
        continue;
      }
      try {
        s = agent.run(std::get<VideoBundle>(entry), item.question, item.options).session;
        if (!s.error.empty()) gateway_failed[i] = 1;
      } catch (const GatewayError& e) {
        s = stub_session(item, e.what());
        gateway_failed[i] = 1;
      } catch (const Error& e) {
        s = stub_session(item, e.what());
      }
      spdlog::debug("item {} done", item.id);
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::min<std::size_t>(options.parallel, std::max<std::size_t>(1, items.size())));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  EvalResult result{build_report(items, sessions), std::move(sessions), 0};
  result.gateway_failures = static_cast<std::size_t>(std::count(gateway_failed.begin(), gateway_failed.end(), 1));

  if (!options.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + options.out_dir.string() + ": " + ec.message());
    std::string transcripts;
    for (const auto& s : result.sessions) transcripts += transcript_to_line(s) + "\n";
    write_text(options.out_dir / kTranscriptFile, transcripts);
    write_text(options.out_dir / kReportJsonFile, result.report.to_json());
    write_text(options.out_dir / kReportTextFile, result.report.to_text());
  }
  return result;
}

}  // namespace gva
