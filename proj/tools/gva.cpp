// SPDX-License-Identifier: Apache-2.0
//
// gva: run single questions, evaluate QA sets, and inspect the graphs and
// caption parses a bundle produces.
//
// Exit codes: 0 ok, 1 usage or configuration, 2 bad data, 3 a model provider
// exhausted its retries.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "gva/agent_core.hpp"
#include "gva/caption_parser.hpp"
#include "gva/config.hpp"
#include "gva/error.hpp"
#include "gva/eval.hpp"
#include "gva/graph_memory.hpp"
#include "gva/ingest_store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kGateway = 3 };

int exit_code_for(gva::ErrorKind kind) {
  switch (kind) {
    case gva::ErrorKind::InvalidArgument:
    case gva::ErrorKind::Config: return kUsage;
    case gva::ErrorKind::Gateway: return kGateway;
    default: return kData;
  }
}

struct CommonOptions {
  fs::path config;
  fs::path bundle;
  fs::path out;
  std::string provider;
  std::optional<std::uint64_t> seed;
};

gva::RunConfig make_config(const CommonOptions& o) {
  if (o.config.empty()) throw gva::Error(gva::ErrorKind::Config, "--config is required");
  auto cfg = gva::load_run_config(o.config);
  if (!o.provider.empty()) cfg.use_chat_provider(o.provider);
  if (o.seed) cfg.set_seed(*o.seed);
  return cfg;
}

gva::Lexicon make_lexicon(const fs::path& config_file) {
  if (config_file.empty()) return gva::Lexicon::builtin();
  auto cfg = gva::load_run_config(config_file);
  return cfg.lexicon_dir.empty() ? gva::Lexicon::builtin() : gva::Lexicon::load(cfg.lexicon_dir);
}

void write_or_print(const fs::path& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw gva::Error(gva::ErrorKind::Io, "cannot write " + out.string());
  f << text;
}

json mention_json(const gva::Mention& m) {
  return {{"surface", m.surface}, {"lemma", m.lemma}, {"type", gva::to_string(m.entity_type)},
          {"span", {m.char_span.start, m.char_span.end}}};
}

json parse_json(const gva::CaptionParse& p, const std::string& caption) {
  json mentions = json::array(), triples = json::array(), states = json::array();
  for (const auto& m : p.mentions) mentions.push_back(mention_json(m));
  for (const auto& t : p.triples) {
    triples.push_back({{"subject", t.subject.lemma}, {"predicate", t.predicate},
                       {"category", gva::to_string(t.category)}, {"object", t.object.lemma}});
  }
  for (const auto& s : p.state_events) states.push_back({{"entity", s.mention.lemma}, {"state", s.state}});
  return {{"frame", p.frame_index}, {"caption", caption}, {"mentions", mentions}, {"triples", triples},
          {"states", states}};
}

int cmd_run(const CommonOptions& o, const std::string& question, const std::vector<std::string>& options) {
  auto cfg = make_config(o);
  auto bundle = gva::load_bundle(o.bundle);
  const auto lexicon = cfg.lexicon_dir.empty() ? gva::Lexicon::builtin() : gva::Lexicon::load(cfg.lexicon_dir);
  gva::ModelGateway gateway(cfg.gateway_config());
  gva::Agent agent(cfg.agent, gateway, lexicon);
  auto result = agent.run(bundle, question, options);
  const auto& s = result.session;

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_or_print(o.out / gva::kTranscriptFile, gva::transcript_to_line(s) + "\n");
    write_or_print(o.out / "graph.json", gva::save_graph(result.graph) + "\n");
  }
  for (const auto& r : s.rounds) {
    std::cout << "round " << r.round << ": answer " << static_cast<char>('A' + r.prediction) << ", confidence "
              << r.confidence << ", " << gva::to_string(r.action);
    if (!r.frames_added.empty()) std::cout << " (+" << r.frames_added.size() << " frames)";
    std::cout << "\n";
  }
  if (s.final_answer) {
    std::cout << "answer: " << static_cast<char>('A' + *s.final_answer) << ". " << s.options[*s.final_answer] << "\n";
  }
  std::cout << "frames used: " << s.frames_used() << ", ended by " << gva::to_string(*s.terminated_by) << "\n";
  if (!s.error.empty()) {
    spdlog::error("{}", s.error);
    return kGateway;
  }
  return kOk;
}

int cmd_eval(const CommonOptions& o, const fs::path& qa, int parallel) {
  auto cfg = make_config(o);
  gva::EvalOptions opts{qa, o.bundle, o.out, parallel};
  auto result = gva::run_eval(opts, cfg);
  std::cout << result.report.to_text();
  if (result.gateway_failures) return kGateway;
  return result.report.failures.empty() ? kOk : kData;
}

int cmd_graph(const CommonOptions& o, bool summary, const std::string& query) {
  auto bundle = gva::load_bundle(o.bundle);
  const auto lexicon = make_lexicon(o.config);
  gva::GraphConfig graph_cfg;
  if (!o.config.empty()) graph_cfg = gva::load_run_config(o.config).agent.graph;

  std::vector<gva::FrameRecord> records;
  std::vector<gva::CaptionParse> parses;
  for (const auto& [f, caption] : bundle.captions) {
    std::optional<gva::Embedding> emb;
    if (auto it = bundle.embeddings.find(f); it != bundle.embeddings.end()) emb = it->second;
    records.push_back({f, caption, emb});
    parses.push_back(gva::parse_caption(caption, f, lexicon));
  }
  auto graph = gva::update_graph(gva::VideoGraph(graph_cfg), records, parses);
  if (!summary) {
    write_or_print(o.out, gva::save_graph(graph) + "\n");
    return kOk;
  }
  auto q = gva::parse_question(query, {}, lexicon);
  auto s = gva::summarize(graph, q, 1 << 20);
  write_or_print(o.out, "Entities:\n" + s.entity_summary + "\n\nRelations:\n" + s.relation_summary +
                            "\n\nState changes:\n" + s.temporal_summary + "\n");
  return kOk;
}

int cmd_extract(const CommonOptions& o, const std::vector<std::string>& captions) {
  const auto lexicon = make_lexicon(o.config);
  std::string out;
  if (!captions.empty()) {
    for (std::size_t i = 0; i < captions.size(); ++i) {
      auto f = static_cast<gva::FrameIndex>(i);
      out += parse_json(gva::parse_caption(captions[i], f, lexicon), captions[i]).dump() + "\n";
    }
  } else {
    if (o.bundle.empty()) throw gva::Error(gva::ErrorKind::InvalidArgument, "extract needs --bundle or --caption");
    auto bundle = gva::load_bundle(o.bundle, {.load_embeddings = false});
    for (const auto& [f, caption] : bundle.captions) {
      out += parse_json(gva::parse_caption(caption, f, lexicon), caption).dump() + "\n";
    }
  }
  write_or_print(o.out, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("gva"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Graph-memory agent for long-video question answering"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  CommonOptions o;
  auto add_common = [&o](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--provider", o.provider, "Name of the chat provider to use from the config");
    sub->add_option("--seed", o.seed, "Seed for deterministic providers");
  };

  auto* run = app.add_subcommand("run", "Answer one question about one bundle");
  std::string question;
  std::vector<std::string> options;
  add_common(run, true);
  run->add_option("--bundle", o.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--question", question, "Question text")->required();
  run->add_option("--option", options, "Answer option (repeat, 2 to 5)")->required();
  run->add_option("--out", o.out, "Directory for transcript.jsonl and graph.json");

  auto* eval = app.add_subcommand("eval", "Evaluate a QA set");
  fs::path qa;
  int parallel = 1;
  add_common(eval, true);
  eval->add_option("--bundle", o.bundle, "Bundle root (one directory per video id)")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--qa", qa, "QA file (JSON lines)")->required();
  eval->add_option("--out", o.out, "Directory for transcripts and reports");
  eval->add_option("--parallel", parallel, "Concurrent sessions")->check(CLI::Range(1, 256));

  auto* graph = app.add_subcommand("graph", "Build a bundle's graph from every captioned frame");
  bool summary = false;
  std::string query;
  add_common(graph, false);
  graph->add_option("--bundle", o.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  graph->add_option("--out", o.out, "Output file (default stdout)");
  graph->add_flag("--summary", summary, "Print the text summaries instead of JSON");
  graph->add_option("--query", query, "Rank the summary against this question");

  auto* extract = app.add_subcommand("extract", "Parse captions without building a graph");
  std::vector<std::string> captions;
  add_common(extract, false);
  extract->add_option("--bundle", o.bundle, "Bundle directory")->check(CLI::ExistingDirectory);
  extract->add_option("--caption", captions, "Caption text (repeatable)");
  extract->add_option("--out", o.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (*run) return cmd_run(o, question, options);
    if (*eval) return cmd_eval(o, qa, parallel);
    if (*graph) return cmd_graph(o, summary, query);
    if (*extract) return cmd_extract(o, captions);
  } catch (const gva::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kUsage;
}
