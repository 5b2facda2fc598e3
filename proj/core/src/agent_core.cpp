// SPDX-License-Identifier: Apache-2.0
#include "gva/agent_core.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "gva/config.hpp"
#include "gva/error.hpp"
#include "gva/hash.hpp"

namespace gva {

namespace {

constexpr const char* kSystemPrompt = "You are a careful video question answering agent.";
constexpr const char* kFormatReminder =
    "Your previous reply could not be parsed. Reply again using exactly these lines:\n"
    "answer: <option letter>\n"
    "confidence: <1, 2 or 3>\n"
    "missing: <what information is still missing, or none>";

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot read prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim_copy(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

void AgentConfig::validate() const {
  if (initial_frames < 1) throw Error(ErrorKind::Config, "agent.initial_frames must be >= 1");
  if (max_rounds < 1) throw Error(ErrorKind::Config, "agent.max_rounds must be >= 1");
  if (confidence_threshold < 1 || confidence_threshold > 3) {
    throw Error(ErrorKind::Config, "agent.confidence_threshold must be in [1, 3]");
  }
  if (prompt_char_budget < kMinSummaryBudget) {
    throw Error(ErrorKind::Config, "agent.prompt_char_budget must be >= " + std::to_string(kMinSummaryBudget));
  }
  selector.validate();
  graph.validate();
}

std::vector<FrameIndex> uniform_sample(int total_frames, int count) {
  if (total_frames < 1 || count < 1) {
    throw Error(ErrorKind::InvalidArgument, "uniform_sample: total_frames and count must be positive");
  }
  std::vector<FrameIndex> out;
  for (int i = 0; i < count; ++i) {
    auto f = static_cast<FrameIndex>(std::floor((i + 0.5) * total_frames / count));
    f = std::clamp(f, 0, total_frames - 1);
    if (out.empty() || out.back() != f) out.push_back(f);
  }
  return out;
}

Action decide_action(int confidence, int round, const AgentConfig& cfg) {
  if (confidence < 1 || confidence > 3) throw Error(ErrorKind::InvalidArgument, "decide_action: confidence outside 1..3");
  if (round < 1 || round > cfg.max_rounds) throw Error(ErrorKind::InvalidArgument, "decide_action: round out of range");
  if (confidence >= cfg.confidence_threshold) return Action::Answer;
  if (round == cfg.max_rounds) return Action::Answer;
  if (round == cfg.max_rounds - 1) return Action::RetrieveExpanded;
  return Action::Retrieve;
}

std::optional<ParsedReply> parse_reply(std::string_view reply, std::size_t option_count) {
  static const std::regex answer_re(R"(answer\s*[:=]\s*\(?\s*([A-Za-z])\b)", std::regex::icase);
  static const std::regex confidence_re(R"(confidence\s*[:=]\s*\(?\s*([0-9]+))", std::regex::icase);
  static const std::regex missing_re(R"(missing(?:[ _]info(?:rmation)?)?\s*[:=][ \t]*([^\r\n]*))", std::regex::icase);

  std::string text(reply);
  std::smatch m;
  if (!std::regex_search(text, m, answer_re)) return std::nullopt;
  int letter = std::toupper(static_cast<unsigned char>(m[1].str()[0])) - 'A';
  if (letter < 0 || static_cast<std::size_t>(letter) >= option_count) return std::nullopt;

  if (!std::regex_search(text, m, confidence_re)) return std::nullopt;
  int confidence = 0;
  try {
    confidence = std::stoi(m[1].str());
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (confidence < 1 || confidence > 3) return std::nullopt;

  ParsedReply out{letter, confidence, {}};
  if (std::regex_search(text, m, missing_re)) {
    auto missing = trim_copy(m[1].str());
    std::string lower = missing;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower != "none" && lower != "nothing" && lower != "n/a" && lower != "-") out.missing_info = missing;
  }
  return out;
}

std::string render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string format_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    out += (i ? "\n" : "") + std::string(1, static_cast<char>('A' + i)) + ". " + options[i];
  }
  return out;
}

std::string format_captions(const std::map<FrameIndex, std::string>& captions) {
  std::string out;
  for (const auto& [f, text] : captions) {
    if (!out.empty()) out += '\n';
    out += "[frame " + std::to_string(f) + "] " + text;
  }
  return out;
}

Agent::Agent(AgentConfig config, ModelGateway& gateway, const Lexicon& lexicon)
    : config_(std::move(config)), gateway_(gateway), lexicon_(lexicon) {
  config_.validate();
  template_ = config_.prompt_template.empty() ? read_text(default_data_dir() / "prompts" / "answer.txt")
                                              : config_.prompt_template;
}

void Agent::integrate_frames(AgentState& state, const std::vector<FrameIndex>& frames) {
  std::vector<FrameRecord> records;
  std::vector<CaptionParse> parses;
  for (auto f : frames) {
    FrameRecord rec{f, gateway_.caption(f, *state.bundle), gateway_.embed(f, state.bundle)};
    auto parse = parse_caption(rec.caption, f, lexicon_);
    if (!config_.extract_relations) parse.triples.clear();
    records.push_back(std::move(rec));
    parses.push_back(std::move(parse));
  }
  state.graph = update_graph(state.graph, records, parses);
  for (const auto& rec : records) state.captions[rec.frame_index] = rec.caption;

  auto& sel = state.session.selected_frames;
  sel.insert(sel.end(), frames.begin(), frames.end());
  std::sort(sel.begin(), sel.end());
  sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
  state.session.graph_version = state.graph.version();
  state.session.entity_count = state.graph.nodes().size();
}

AgentState Agent::start(const VideoBundle& bundle, const std::string& question,
                        const std::vector<std::string>& options) {
  if (question.empty()) throw Error(ErrorKind::InvalidArgument, "empty question");
  if (options.size() < 2 || options.size() > kMaxOptions) {
    throw Error(ErrorKind::InvalidArgument, "question needs 2 to 5 options");
  }
  AgentState state;
  state.bundle = &bundle;
  state.graph = VideoGraph(config_.graph);
  state.session.video_id = bundle.video_id;
  state.session.question = question;
  state.session.options = options;
  state.query = parse_question(question, options, lexicon_);
  state.available_frames = gateway_.captionable_frames(bundle);

  std::string query_text = question;
  for (const auto& o : options) query_text += "\n" + o;
  state.query_embedding = gateway_.embed(query_text);

  std::vector<FrameIndex> initial;
  if (state.available_frames) {
    if (state.available_frames->empty()) {
      throw Error(ErrorKind::Data, "bundle '" + bundle.video_id + "' has no captioned frames");
    }
    for (auto i : uniform_sample(static_cast<int>(state.available_frames->size()), config_.initial_frames)) {
      initial.push_back((*state.available_frames)[static_cast<std::size_t>(i)]);
    }
  } else {
    initial = uniform_sample(bundle.total_frames, config_.initial_frames);
  }
  state.session.initial_frames = initial;
  integrate_frames(state, initial);
  return state;
}

Evaluation Agent::evaluate_state(const AgentState& state) {
  const auto& s = state.session;
  auto summary = summarize(state.graph, state.query, config_.prompt_char_budget);
  Evaluation ev;
  ev.prompt = render_prompt(template_, {{"question", s.question},
                                        {"options", format_options(s.options)},
                                        {"frame_captions", format_captions(state.captions)},
                                        {"entity_summary", summary.entity_summary},
                                        {"relation_summary", summary.relation_summary},
                                        {"temporal_summary", summary.temporal_summary}});
  ev.prompt_digest = sha256_hex(ev.prompt);

  const int round = static_cast<int>(s.rounds.size()) + 1;
  ChatRequest request{{{"system", kSystemPrompt}, {"user", ev.prompt}}, round};
  auto reply = gateway_.chat(request);
  auto parsed = parse_reply(reply, s.options.size());
  if (!parsed) {
    spdlog::info("round {}: reply did not follow the format, asking once more", round);
    request.messages.push_back({"assistant", reply});
    request.messages.push_back({"user", kFormatReminder});
    parsed = parse_reply(gateway_.chat(request), s.options.size());
  }
  if (!parsed) {
    spdlog::warn("round {}: unparseable reply after retry; defaulting to option A, confidence 1", round);
    parsed = ParsedReply{0, 1, kUnparseableReply};
  }
  ev.prediction = parsed->prediction;
  ev.confidence = parsed->confidence;
  ev.missing_info = parsed->missing_info;
  return ev;
}

void Agent::finish(AgentState& state, int answer, Termination how) {
  state.session.final_answer = answer;
  state.session.terminated_by = how;
  state.session.graph_version = state.graph.version();
  state.session.entity_count = state.graph.nodes().size();
}

void Agent::run_round(AgentState& state) {
  auto& s = state.session;
  if (s.terminated()) return;
  const int round = static_cast<int>(s.rounds.size()) + 1;
  const int latest = s.rounds.empty() ? 0 : s.rounds.back().prediction;

  Evaluation ev;
  try {
    ev = evaluate_state(state);
  } catch (const GatewayError& e) {
    spdlog::error("round {}: {}", round, e.what());
    s.rounds.push_back(RoundLog{round, {}, latest, 1, std::string("gateway error: ") + e.what(), {}, Action::Answer});
    s.error = e.what();
    finish(state, latest, Termination::RoundLimit);
    return;
  }

  RoundLog log{round, {}, ev.prediction, ev.confidence, ev.missing_info, ev.prompt_digest, Action::Answer};
  log.action = decide_action(ev.confidence, round, config_);
  if (log.action == Action::Answer) {
    s.rounds.push_back(log);
    finish(state, ev.prediction,
           ev.confidence >= config_.confidence_threshold ? Termination::Confident : Termination::RoundLimit);
    return;
  }

  const bool expanded = log.action == Action::RetrieveExpanded;
  auto segments = identify_segments(state.graph, state.query, state.bundle->total_frames, expanded, config_.selector);
  auto pool = candidate_frames(segments, s.selected_frames, state.available_frames);
  std::vector<FrameIndex> picked;
  if (!pool.empty()) {
    std::vector<Candidate> candidates;
    candidates.reserve(pool.size());
    for (auto f : pool) {
      candidates.push_back({f, state.query_embedding ? gateway_.embed(f, state.bundle) : std::nullopt});
    }
    picked = select_frames(candidates, state.graph, state.query, state.query_embedding, s.selected_frames,
                           state.bundle->total_frames, config_.selector, expanded);
  }
  if (picked.empty()) {
    spdlog::info("round {}: no candidate frames left", round);
    s.rounds.push_back(log);
    finish(state, ev.prediction, Termination::Exhausted);
    return;
  }

  try {
    integrate_frames(state, picked);
  } catch (const GatewayError& e) {
    spdlog::error("round {}: {}", round, e.what());
    s.rounds.push_back(log);
    s.error = e.what();
    finish(state, ev.prediction, Termination::RoundLimit);
    return;
  }
  log.frames_added = picked;
  s.rounds.push_back(log);
}

AgentRun Agent::run(const VideoBundle& bundle, const std::string& question, const std::vector<std::string>& options) {
  auto state = start(bundle, question, options);
  while (!state.session.terminated()) run_round(state);
  return {std::move(state.session), std::move(state.graph)};
}

}  // namespace gva
