// SPDX-License-Identifier: Apache-2.0
#include "gva/ingest_store.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>

#include "gva/error.hpp"
#include "gva/hash.hpp"

namespace gva {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kind, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s, const std::string& where) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw Error(ErrorKind::Data, where + ": dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: throw Error(ErrorKind::Data, where + ": unknown escape \\" + std::string(1, s[i]));
    }
  }
  return out;
}

FrameIndex parse_frame(std::string_view s, const std::string& where) {
  FrameIndex f = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), f);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Data, where + ": bad frame index '" + std::string(s) + "'");
  }
  return f;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Embedding parse_vector(std::string_view s, const std::string& where) {
  Embedding v;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    if (i == s.size()) break;
    double x = 0;
    auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), x);
    if (ec != std::errc() || (ptr != s.data() + s.size() && *ptr != ' ') || !std::isfinite(x)) {
      throw Error(ErrorKind::Data, where + ": bad number");
    }
    v.push_back(x);
    i = static_cast<std::size_t>(ptr - s.data());
  }
  return v;
}

std::pair<std::string_view, std::string_view> split_tab(std::string_view line, const std::string& where) {
  auto tab = line.find('\t');
  if (tab == std::string_view::npos) throw Error(ErrorKind::Data, where + ": expected <frame>\\t<value>");
  return {line.substr(0, tab), line.substr(tab + 1)};
}

}  // namespace

void VideoBundle::validate() const {
  auto fail = [this](const std::string& msg) { throw Error(ErrorKind::Data, "bundle '" + video_id + "': " + msg); };
  if (video_id.empty()) throw Error(ErrorKind::Data, "bundle has an empty video_id");
  if (total_frames < 1) fail("total_frames must be positive");
  if (fps && !(*fps > 0 && std::isfinite(*fps))) fail("fps must be positive");
  for (const auto& [f, _] : captions) {
    if (f < 0 || f >= total_frames) fail("caption for out-of-range frame " + std::to_string(f));
  }
  if (!embeddings.empty() && embedding_dim == 0) fail("embeddings present but embedding_dim is 0");
  std::optional<FrameIndex> reference;  // first frame whose vector has the declared size
  for (const auto& [f, v] : embeddings) {
    if (v.size() == embedding_dim) {
      reference = f;
      break;
    }
  }
  for (const auto& [f, v] : embeddings) {
    if (f < 0 || f >= total_frames) fail("embedding for out-of-range frame " + std::to_string(f));
    if (v.size() != embedding_dim) {
      std::string msg = "frame " + std::to_string(f) + " embedding has " + std::to_string(v.size()) + " dims";
      if (reference) {
        msg += " but frame " + std::to_string(*reference) + " has " + std::to_string(embedding_dim);
      } else {
        msg += ", expected " + std::to_string(embedding_dim);
      }
      fail(msg);
    }
  }
}

std::string_view to_string(QACategory category) {
  switch (category) {
    case QACategory::Causal: return "causal";
    case QACategory::Temporal: return "temporal";
    case QACategory::Descriptive: return "descriptive";
  }
  return "causal";
}

std::string_view to_string(EntityBucket bucket) {
  switch (bucket) {
    case EntityBucket::Few: return "2-3";
    case EntityBucket::Mid: return "4-6";
    case EntityBucket::Many: return "7+";
  }
  return "2-3";
}

QACategory qa_category_from_string(std::string_view name) {
  std::string s(name);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "causal" || s == "c") return QACategory::Causal;
  if (s == "temporal" || s == "t") return QACategory::Temporal;
  if (s == "descriptive" || s == "d") return QACategory::Descriptive;
  throw Error(ErrorKind::Parse, "unknown question category '" + s + "'");
}

EntityBucket entity_bucket_from_string(std::string_view name) {
  std::string s(name);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "few" || s == "2-3") return EntityBucket::Few;
  if (s == "mid" || s == "4-6") return EntityBucket::Mid;
  if (s == "many" || s == "7+") return EntityBucket::Many;
  throw Error(ErrorKind::Parse, "unknown entity bucket '" + s + "'");
}

std::string question_hash(std::string_view question, const std::vector<std::string>& options) {
  // Length-prefixed so that no two (question, options) pairs collide by concatenation.
  std::string buf = std::to_string(question.size()) + ":" + std::string(question);
  for (const auto& o : options) buf += "|" + std::to_string(o.size()) + ":" + o;
  return sha256_hex(buf);
}

// ---------------------------------------------------------------------------
// Bundles

VideoBundle load_bundle(const fs::path& directory, const BundleLoadOptions& options) {
  const auto manifest_path = directory / kManifestFile;
  VideoBundle b;
  try {
    auto m = json::parse(read_file(manifest_path, ErrorKind::Data));
    b.video_id = m.at("video_id").get<std::string>();
    b.total_frames = m.at("total_frames").get<int>();
    if (m.contains("fps") && !m["fps"].is_null()) b.fps = m["fps"].get<double>();
    if (m.contains("embedding_dim")) b.embedding_dim = m["embedding_dim"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Data, manifest_path.string() + ": " + e.what());
  }

  const auto captions_path = directory / kCaptionsFile;
  if (fs::exists(captions_path)) {
    auto text = read_file(captions_path, ErrorKind::Data);
    int line_no = 0;
    for (auto line : split_lines(text)) {
      ++line_no;
      if (line.empty()) continue;
      const auto where = captions_path.string() + ":" + std::to_string(line_no);
      auto [frame, caption] = split_tab(line, where);
      auto f = parse_frame(frame, where);
      if (f < 0 || f >= b.total_frames) {
        throw Error(ErrorKind::Data, where + ": frame " + std::to_string(f) + " outside [0, " +
                                         std::to_string(b.total_frames) + ")");
      }
      b.captions[f] = unescape_field(caption, where);
    }
  }

  const auto embeddings_path = directory / kEmbeddingsFile;
  if (options.load_embeddings && fs::exists(embeddings_path)) {
    auto text = read_file(embeddings_path, ErrorKind::Data);
    int line_no = 0;
    for (auto line : split_lines(text)) {
      ++line_no;
      if (line.empty()) continue;
      const auto where = embeddings_path.string() + ":" + std::to_string(line_no);
      auto [frame, values] = split_tab(line, where);
      auto f = parse_frame(frame, where);
      if (f < 0 || f >= b.total_frames) {
        throw Error(ErrorKind::Data, where + ": frame " + std::to_string(f) + " outside [0, " +
                                         std::to_string(b.total_frames) + ")");
      }
      b.embeddings[f] = parse_vector(values, where);
    }
    if (b.embedding_dim == 0 && !b.embeddings.empty()) b.embedding_dim = b.embeddings.begin()->second.size();
  }
  b.validate();
  return b;
}

void save_bundle(const VideoBundle& bundle, const fs::path& directory) {
  bundle.validate();
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + directory.string() + ": " + ec.message());

  json m = {{"video_id", bundle.video_id}, {"total_frames", bundle.total_frames}};
  if (bundle.fps) m["fps"] = *bundle.fps;
  if (bundle.embedding_dim) m["embedding_dim"] = bundle.embedding_dim;
  write_file(directory / kManifestFile, m.dump(2) + "\n");

  std::string captions;
  for (const auto& [f, text] : bundle.captions) captions += std::to_string(f) + "\t" + escape_field(text) + "\n";
  write_file(directory / kCaptionsFile, captions);

  if (bundle.embeddings.empty()) {
    fs::remove(directory / kEmbeddingsFile, ec);
    return;
  }
  std::string embeddings;
  for (const auto& [f, v] : bundle.embeddings) {
    embeddings += std::to_string(f) + "\t";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) embeddings += ' ';
      embeddings += format_double(v[i]);
    }
    embeddings += '\n';
  }
  write_file(directory / kEmbeddingsFile, embeddings);
}

// ---------------------------------------------------------------------------
// QA sets

std::vector<QAItem> load_qa(const fs::path& file) {
  auto text = read_file(file, ErrorKind::Io);
  std::vector<QAItem> items;
  int line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto where = file.string() + ":" + std::to_string(line_no);
    QAItem item;
    try {
      auto j = json::parse(line);
      item.video_id = j.at("video_id").get<std::string>();
      item.question = j.at("question").get<std::string>();
      item.options = j.at("options").get<std::vector<std::string>>();
      item.id = j.contains("id") ? j["id"].get<std::string>() : item.video_id + "#" + std::to_string(line_no);
      if (j.contains("answer") && !j["answer"].is_null()) {
        const auto& a = j["answer"];
        if (a.is_number_integer()) {
          item.answer_index = a.get<int>();
        } else {
          auto s = a.get<std::string>();
          if (s.size() != 1 || !std::isalpha(static_cast<unsigned char>(s[0]))) {
            throw Error(ErrorKind::Data, where + ": answer must be an index or a single letter");
          }
          item.answer_index = std::toupper(static_cast<unsigned char>(s[0])) - 'A';
        }
      }
      if (j.contains("category") && !j["category"].is_null()) {
        item.category = qa_category_from_string(j["category"].get<std::string>());
      }
      if (j.contains("entity_bucket") && !j["entity_bucket"].is_null()) {
        item.entity_bucket = entity_bucket_from_string(j["entity_bucket"].get<std::string>());
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Data, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Data) throw;
      throw Error(ErrorKind::Data, where + ": " + e.what());
    }
    if (item.options.size() < 2 || item.options.size() > kMaxOptions) {
      throw Error(ErrorKind::Data, where + ": expected 2 to 5 options");
    }
    if (item.answer_index && (*item.answer_index < 0 || *item.answer_index >= static_cast<int>(item.options.size()))) {
      throw Error(ErrorKind::Data, where + ": answer out of range");
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::string qa_to_line(const QAItem& item) {
  json j = {{"id", item.id}, {"video_id", item.video_id}, {"question", item.question}, {"options", item.options}};
  if (item.answer_index) j["answer"] = *item.answer_index;
  if (item.category) j["category"] = to_string(*item.category);
  if (item.entity_bucket) j["entity_bucket"] = to_string(*item.entity_bucket);
  return j.dump();
}

// ---------------------------------------------------------------------------
// Graphs

std::string save_graph(const VideoGraph& graph) {
  const auto& c = graph.config();
  json nodes = json::array();
  for (const auto& [id, n] : graph.nodes()) {
    json snippets = json::array();
    for (const auto& [f, s] : n.caption_snippets) snippets.push_back({f, s});
    json states = json::array();
    for (const auto& [f, s] : n.state_history) states.push_back({f, s});
    nodes.push_back({{"id", id},
                     {"lemma", n.canonical_lemma},
                     {"aliases", n.aliases},
                     {"type", to_string(n.entity_type)},
                     {"frames", n.frame_indices},
                     {"feature", n.feature ? json(*n.feature) : json(nullptr)},
                     {"feature_count", n.feature_count},
                     {"snippets", snippets},
                     {"states", states}});
  }
  json edges = json::array();
  for (const auto& [id, e] : graph.edges()) {
    edges.push_back({{"id", id},
                     {"src", e.src},
                     {"dst", e.dst},
                     {"category", to_string(e.category)},
                     {"predicate", e.predicate},
                     {"frames", e.frame_indices}});
  }
  json doc = {{"schema_version", kGraphSchemaVersion},
              {"version", graph.version()},
              {"embedding_dim", graph.embedding_dim()},
              {"config",
               {{"coherence_alpha", c.coherence_alpha}, {"window", c.window}, {"merge_similarity", c.merge_similarity}}},
              {"processed_frames", graph.processed_frames()},
              {"nodes", nodes},
              {"edges", edges}};
  return doc.dump();
}

VideoGraph load_graph(std::string_view payload) {
  json doc;
  try {
    doc = json::parse(payload);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("graph payload: ") + e.what());
  }
  try {
    auto schema = doc.at("schema_version").get<int>();
    if (schema != kGraphSchemaVersion) {
      throw Error(ErrorKind::SchemaVersion, "graph schema version " + std::to_string(schema) + ", expected " +
                                                std::to_string(kGraphSchemaVersion));
    }
    GraphConfig cfg;
    const auto& c = doc.at("config");
    cfg.coherence_alpha = c.at("coherence_alpha").get<double>();
    cfg.window = c.at("window").get<int>();
    cfg.merge_similarity = c.at("merge_similarity").get<double>();

    std::map<EntityId, EntityNode> nodes;
    for (const auto& j : doc.at("nodes")) {
      EntityNode n;
      n.id = j.at("id").get<EntityId>();
      n.canonical_lemma = j.at("lemma").get<std::string>();
      n.aliases = j.at("aliases").get<std::set<std::string>>();
      n.entity_type = entity_type_from_string(j.at("type").get<std::string>());
      n.frame_indices = j.at("frames").get<std::vector<FrameIndex>>();
      if (!j.at("feature").is_null()) n.feature = j["feature"].get<Embedding>();
      n.feature_count = j.at("feature_count").get<int>();
      for (const auto& s : j.at("snippets")) {
        n.caption_snippets.emplace_back(s.at(0).get<FrameIndex>(), s.at(1).get<std::string>());
      }
      for (const auto& s : j.at("states")) n.state_history.emplace_back(s.at(0).get<FrameIndex>(), s.at(1).get<std::string>());
      if (!nodes.emplace(n.id, n).second) throw Error(ErrorKind::Parse, "duplicate node id " + std::to_string(n.id));
    }
    std::map<EdgeId, RelationEdge> edges;
    for (const auto& j : doc.at("edges")) {
      RelationEdge e;
      e.id = j.at("id").get<EdgeId>();
      e.src = j.at("src").get<EntityId>();
      e.dst = j.at("dst").get<EntityId>();
      e.category = relation_category_from_string(j.at("category").get<std::string>());
      e.predicate = j.at("predicate").get<std::string>();
      e.frame_indices = j.at("frames").get<std::vector<FrameIndex>>();
      if (!edges.emplace(e.id, e).second) throw Error(ErrorKind::Parse, "duplicate edge id " + std::to_string(e.id));
    }
    return VideoGraph::from_parts(cfg, doc.at("version").get<std::uint64_t>(),
                                  doc.at("embedding_dim").get<std::size_t>(), std::move(nodes), std::move(edges),
                                  doc.at("processed_frames").get<std::set<FrameIndex>>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("graph payload: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Transcripts

std::string transcript_to_line(const AgentSession& s) {
  json rounds = json::array();
  for (const auto& r : s.rounds) {
    rounds.push_back({{"round", r.round},
                      {"frames_added", r.frames_added},
                      {"prediction", r.prediction},
                      {"confidence", r.confidence},
                      {"missing_info", r.missing_info},
                      {"prompt_digest", r.prompt_digest},
                      {"action", to_string(r.action)}});
  }
  json j = {{"video_id", s.video_id},
            {"question", s.question},
            {"question_hash", question_hash(s.question, s.options)},
            {"options", s.options},
            {"initial_frames", s.initial_frames},
            {"selected_frames", s.selected_frames},
            {"rounds", rounds},
            {"final_answer", s.final_answer ? json(*s.final_answer) : json(nullptr)},
            {"terminated_by", s.terminated_by ? json(to_string(*s.terminated_by)) : json(nullptr)},
            {"graph_version", s.graph_version},
            {"entity_count", s.entity_count},
            {"error", s.error}};
  return j.dump();
}

AgentSession transcript_from_line(std::string_view line) {
  try {
    auto j = json::parse(line);
    AgentSession s;
    s.video_id = j.at("video_id").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.options = j.at("options").get<std::vector<std::string>>();
    s.initial_frames = j.at("initial_frames").get<std::vector<FrameIndex>>();
    s.selected_frames = j.at("selected_frames").get<std::vector<FrameIndex>>();
    for (const auto& r : j.at("rounds")) {
      s.rounds.push_back(RoundLog{r.at("round").get<int>(), r.at("frames_added").get<std::vector<FrameIndex>>(),
                                  r.at("prediction").get<int>(), r.at("confidence").get<int>(),
                                  r.at("missing_info").get<std::string>(), r.at("prompt_digest").get<std::string>(),
                                  action_from_string(r.at("action").get<std::string>())});
    }
    if (!j.at("final_answer").is_null()) s.final_answer = j["final_answer"].get<int>();
    if (!j.at("terminated_by").is_null()) s.terminated_by = termination_from_string(j["terminated_by"].get<std::string>());
    s.graph_version = j.at("graph_version").get<std::uint64_t>();
    s.entity_count = j.at("entity_count").get<std::size_t>();
    s.error = j.value("error", "");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("transcript line: ") + e.what());
  }
}

void save_transcript(const AgentSession& session, const fs::path& file) {
  static std::mutex mutex;
  auto line = transcript_to_line(session) + "\n";
  std::lock_guard lock(mutex);
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::Io, "cannot append to " + file.string());
  out << line;
}

std::vector<AgentSession> load_transcripts(const fs::path& file) {
  auto text = read_file(file, ErrorKind::Io);
  std::vector<AgentSession> out;
  for (auto line : split_lines(text)) {
    if (!line.empty()) out.push_back(transcript_from_line(line));
  }
  return out;
}

std::optional<AgentSession> find_transcript(const fs::path& file, std::string_view video_id,
                                            std::string_view hash) {
  for (auto& s : load_transcripts(file)) {
    if (s.video_id == video_id && question_hash(s.question, s.options) == hash) return std::move(s);
  }
  return std::nullopt;
}

}  // namespace gva
