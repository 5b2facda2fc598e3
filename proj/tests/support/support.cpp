// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gva::testing {

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "gva-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VideoGraph ingest(const VideoGraph& graph, const std::vector<std::pair<FrameIndex, std::string>>& captions,
                  const Lexicon& lex) {
  std::vector<FrameRecord> records;
  std::vector<CaptionParse> parses;
  for (const auto& [f, text] : captions) {
    records.push_back({f, text, std::nullopt});
    parses.push_back(parse_caption(text, f, lex));
  }
  return update_graph(graph, records, parses);
}

VideoGraph dog_toy_graph(const Lexicon& lex) {
  return ingest(VideoGraph{}, {{0, kDogToyCaptions[0]}, {1, kDogToyCaptions[1]}, {2, kDogToyCaptions[2]}}, lex);
}

// ---------------------------------------------------------------------------

bool structurally_equal(const VideoGraph& a, const VideoGraph& b, std::string* why) {
  auto fail = [why](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (!(a.config() == b.config())) return fail("config differs");
  if (a.version() != b.version()) return fail("version differs");
  if (a.embedding_dim() != b.embedding_dim()) return fail("embedding_dim differs");
  if (a.processed_frames() != b.processed_frames()) return fail("processed frames differ");
  if (a.nodes().size() != b.nodes().size()) return fail("node count differs");
  if (a.edges().size() != b.edges().size()) return fail("edge count differs");

  std::map<std::string, const EntityNode*> by_lemma;
  for (const auto& [_, n] : b.nodes()) by_lemma[n.canonical_lemma] = &n;
  for (const auto& [_, n] : a.nodes()) {
    auto it = by_lemma.find(n.canonical_lemma);
    if (it == by_lemma.end()) return fail("node '" + n.canonical_lemma + "' missing");
    const auto& m = *it->second;
    if (n.aliases != m.aliases) return fail(n.canonical_lemma + ": aliases differ");
    if (n.entity_type != m.entity_type) return fail(n.canonical_lemma + ": type differs");
    if (n.frame_indices != m.frame_indices) return fail(n.canonical_lemma + ": frames differ");
    if (n.feature != m.feature) return fail(n.canonical_lemma + ": feature differs");
    if (n.feature_count != m.feature_count) return fail(n.canonical_lemma + ": feature count differs");
    if (n.caption_snippets != m.caption_snippets) return fail(n.canonical_lemma + ": snippets differ");
    if (n.state_history != m.state_history) return fail(n.canonical_lemma + ": states differ");
  }

  using Key = std::tuple<std::string, std::string, std::string>;
  auto edge_map = [](const VideoGraph& g) {
    std::map<Key, const RelationEdge*> out;
    for (const auto& [_, e] : g.edges()) {
      out[{g.node(e.src).canonical_lemma, e.predicate, g.node(e.dst).canonical_lemma}] = &e;
    }
    return out;
  };
  auto ea = edge_map(a), eb = edge_map(b);
  for (const auto& [key, e] : ea) {
    auto it = eb.find(key);
    const auto label = std::get<0>(key) + " -" + std::get<1>(key) + "-> " + std::get<2>(key);
    if (it == eb.end()) return fail("edge " + label + " missing");
    if (e->category != it->second->category) return fail("edge " + label + ": category differs");
    if (e->frame_indices != it->second->frame_indices) return fail("edge " + label + ": frames differ");
  }
  return true;
}

std::vector<FrameIndex> brute_force_select(const std::vector<FrameIndex>& candidates,
                                           const std::vector<std::vector<double>>& candidate_embeddings,
                                           const std::vector<std::vector<FrameIndex>>& query_entity_frames,
                                           const std::vector<double>* query_embedding,
                                           const std::vector<FrameIndex>& selected, int total_frames,
                                           double w_graph, double w_visual, double w_temporal, int k,
                                           double decay_len) {
  const std::size_t n = candidates.size();
  std::vector<double> g(n), v(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int f = candidates[i];
    double sum = 0;
    for (const auto& frames : query_entity_frames) {
      int best = INT32_MAX;
      for (int a : frames) best = std::min(best, std::abs(f - a));
      sum += std::exp(-static_cast<double>(best) / decay_len);
    }
    g[i] = sum;

    v[i] = 0.5;
    if (query_embedding && !candidate_embeddings[i].empty()) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t d = 0; d < query_embedding->size(); ++d) {
        dot += candidate_embeddings[i][d] * (*query_embedding)[d];
        na += candidate_embeddings[i][d] * candidate_embeddings[i][d];
        nb += (*query_embedding)[d] * (*query_embedding)[d];
      }
      if (na > 0 && nb > 0) v[i] = (1.0 + std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0)) / 2.0;
    }

    // Linear scan for the enclosing gap between selected frames.
    double lo = -1, hi = total_frames;
    bool taken = false;
    for (int s : selected) {
      if (s == f) taken = true;
      if (s < f) lo = std::max<double>(lo, s);
      if (s > f) hi = std::min<double>(hi, s);
    }
    if (taken) {
      t[i] = 0;
    } else {
      double gap = hi - lo - 1;
      t[i] = gap / total_frames * (1.0 - std::abs(f - (lo + hi) / 2.0) / (gap / 2.0));
    }
  }
  auto minmax = [](std::vector<double>& xs) {
    double lo = *std::min_element(xs.begin(), xs.end());
    double hi = *std::max_element(xs.begin(), xs.end());
    for (auto& x : xs) x = hi == lo ? 0.5 : (x - lo) / (hi - lo);
  };
  if (n == 0) return {};
  minmax(g);
  minmax(v);
  minmax(t);

  std::vector<std::pair<double, int>> scored;
  for (std::size_t i = 0; i < n; ++i) scored.push_back({w_graph * g[i] + w_visual * v[i] + w_temporal * t[i], candidates[i]});
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<FrameIndex> out;
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i) out.push_back(scored[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

SelectionInstance random_selection_instance(std::mt19937& rng, std::size_t max_candidates) {
  SelectionInstance in;
  in.total_frames = 10 + static_cast<int>(rng() % 991);
  auto frame = [&] { return static_cast<FrameIndex>(rng() % static_cast<unsigned>(in.total_frames)); };

  const std::vector<std::string> lemmas = {"dog", "cat", "man", "cup", "ball", "door"};
  for (const auto& l : lemmas) {
    if (rng() % 3 == 0) continue;
    Mention m;
    m.lemma = m.surface = l;
    m.entity_type = EntityType::Object;
    for (int i = 1 + static_cast<int>(rng() % 4); i > 0; --i) in.graph.upsert_entity(m, frame(), std::nullopt);
  }
  for (const auto& l : lemmas) {
    if (rng() % 2) continue;
    Mention m;
    m.lemma = m.surface = l;
    in.query.entities.push_back(m);
  }

  std::set<FrameIndex> selected;
  for (int i = static_cast<int>(rng() % 12); i > 0; --i) selected.insert(frame());
  in.selected.assign(selected.begin(), selected.end());

  const bool visual = rng() % 2;
  const std::size_t dim = 3;
  std::uniform_int_distribution<int> coarse(-2, 2);
  auto vec = [&] {
    Embedding v(dim);
    for (auto& x : v) x = coarse(rng);
    return v;
  };
  if (visual) in.query_embedding = vec();

  std::set<FrameIndex> used;
  const std::size_t want = 1 + rng() % max_candidates;
  for (std::size_t tries = 0; used.size() < want && tries < 4 * want; ++tries) {
    auto f = frame();
    if (selected.count(f) || !used.insert(f).second) continue;
    std::optional<Embedding> e;
    if (visual && rng() % 5 != 0) e = vec();
    in.candidates.push_back({f, e});
  }

  if (rng() % 3 == 0) {
    in.config = SelectorConfig{};
  } else {
    std::uniform_int_distribution<int> share(0, 10);
    int a = share(rng), b = share(rng), c = share(rng);
    if (a + b + c == 0) a = 1;
    const double sum = a + b + c;
    in.config.weight_graph = a / sum;
    in.config.weight_visual = b / sum;
    in.config.weight_temporal = c / sum;
  }
  in.config.k = 1 + static_cast<int>(rng() % 5);
  in.config.decay_len = 1 + static_cast<double>(rng() % 32);
  return in;
}

std::vector<FrameIndex> oracle_select(const SelectionInstance& in) {
  std::vector<FrameIndex> frames;
  std::vector<std::vector<double>> embeddings;
  for (const auto& c : in.candidates) {
    frames.push_back(c.frame_index);
    embeddings.push_back(c.embedding.value_or(std::vector<double>{}));
  }
  std::vector<std::vector<FrameIndex>> entity_frames;
  for (const auto& m : in.query.entities) {
    for (const auto& [_, n] : in.graph.nodes()) {
      if (n.canonical_lemma == m.lemma) entity_frames.push_back(n.frame_indices);
    }
  }
  const std::vector<double>* q = in.query_embedding ? &*in.query_embedding : nullptr;
  return brute_force_select(frames, embeddings, entity_frames, q, in.selected, in.total_frames,
                            in.config.weight_graph, in.config.weight_visual, in.config.weight_temporal, in.config.k,
                            in.config.decay_len);
}

double coherence_oracle(const EntityHistory& h, const std::vector<FrameIndex>& processed, FrameIndex f, int window,
                        double alpha) {
  auto state_at = [&](FrameIndex x) {
    std::string s = "neutral";
    for (const auto& [frame, label] : h.states) {
      if (frame <= x) s = label;
    }
    return s;
  };

  std::vector<FrameIndex> obs;
  for (auto o : h.observations) {
    if (o <= f) obs.push_back(o);
  }
  while (static_cast<int>(obs.size()) > window) obs.erase(obs.begin());
  double s_value = 1.0;
  if (obs.size() >= 2) {
    const auto ref = state_at(f);
    int same = 0;
    for (auto o : obs) same += state_at(o) == ref;
    s_value = static_cast<double>(same) / obs.size();
  }

  std::vector<FrameIndex> recent;
  for (auto p : processed) {
    if (p < f) recent.push_back(p);
  }
  while (static_cast<int>(recent.size()) > window) recent.erase(recent.begin());
  int at_f = 0, kept = 0;
  for (const auto& frames : h.incident_edges) {
    if (std::find(frames.begin(), frames.end(), f) == frames.end()) continue;
    ++at_f;
    bool seen = false;
    for (auto r : recent) seen = seen || std::find(frames.begin(), frames.end(), r) != frames.end();
    kept += seen;
  }
  double r_value = at_f ? static_cast<double>(kept) / at_f : 0.0;
  return alpha * s_value + (1 - alpha) * r_value;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
const T& pick(std::mt19937& rng, const std::vector<T>& xs) {
  return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
}

const std::vector<std::string> kAgents = {"man", "woman", "boy", "girl", "dog", "cat", "person", "chef", "teacher"};
const std::vector<std::string> kThings = {"toy", "ball", "cup", "book", "door", "knife", "box", "phone", "bottle"};
const std::vector<std::string> kVerbs = {"takes", "holds", "opens", "watches", "chases", "pushes", "picks up"};
const std::vector<std::string> kPreps = {"on", "near", "in", "under", "behind"};
const std::vector<std::string> kPlaces = {"table", "kitchen", "park", "sofa", "room"};
const std::vector<std::string> kMoods = {"angry", "happy", "excited", "tired", "calm"};
const std::vector<std::string> kUnicode = {"café", "naïve", "東京", "señor", "ωmega", "🐕", "crème", "straße"};

}  // namespace

std::string random_caption(std::mt19937& rng, bool unicode) {
  std::string a = pick(rng, kAgents), b = pick(rng, kThings);
  if (unicode && rng() % 3 == 0) b = pick(rng, kUnicode);
  switch (rng() % 4) {
    case 0: return "the " + a + " " + pick(rng, kVerbs) + " the " + b;
    case 1: return "the " + a + " " + pick(rng, kVerbs) + " the " + b + " " + pick(rng, kPreps) + " the " + pick(rng, kPlaces);
    case 2: return "the " + a + " becomes " + pick(rng, kMoods);
    default: return "a " + b + " lies " + pick(rng, kPreps) + " the " + pick(rng, kPlaces) + ". the " + a + " gets " + pick(rng, kMoods);
  }
}

Embedding random_unit_vector(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  Embedding v(dim);
  double norm = 0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

VideoGraph random_graph(std::mt19937& rng, std::size_t dim, bool unicode) {
  VideoGraph g;
  std::uniform_int_distribution<int> batches(0, 3), per_batch(1, 5);
  FrameIndex next = static_cast<FrameIndex>(rng() % 5);
  for (int b = batches(rng); b > 0; --b) {
    std::vector<FrameRecord> records;
    std::vector<CaptionParse> parses;
    for (int i = per_batch(rng); i > 0; --i) {
      FrameRecord r{next, random_caption(rng, unicode), std::nullopt};
      if (dim && rng() % 4 != 0) r.embedding = random_unit_vector(rng, dim);
      parses.push_back(parse_caption(r.caption, r.frame_index));
      records.push_back(std::move(r));
      next += 1 + static_cast<FrameIndex>(rng() % 20);
    }
    g = update_graph(g, records, parses);
  }
  return g;
}

VideoBundle random_bundle(std::mt19937& rng, std::size_t dim, bool unicode) {
  VideoBundle b;
  b.video_id = "video-" + std::to_string(rng() % 100000);
  b.total_frames = 1 + static_cast<int>(rng() % 300);
  if (rng() % 2) b.fps = std::uniform_real_distribution<double>(1.0, 60.0)(rng);
  for (int i = 0; i < 20; ++i) {
    auto f = static_cast<FrameIndex>(rng() % static_cast<unsigned>(b.total_frames));
    auto text = random_caption(rng, unicode);
    if (rng() % 5 == 0) text += "\twith a tab\nand a newline and a back\\slash";
    b.captions[f] = text;
  }
  if (dim) {
    b.embedding_dim = dim;
    for (int i = 0; i < 5; ++i) {
      b.embeddings[static_cast<FrameIndex>(rng() % static_cast<unsigned>(b.total_frames))] = random_unit_vector(rng, dim);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

struct CausalSpec {
  std::string animal;
  std::string verb_3sg;  // as it appears in the caption, including any preposition
  std::string verb;      // lemma
  std::string person;
  std::string object;
};

const std::vector<CausalSpec> kCausal = {
    {"dog", "barks at", "bark", "person", "toy"},      {"cat", "bites", "bite", "boy", "ball"},
    {"horse", "kicks", "kick", "girl", "cup"},         {"goat", "chases", "chase", "woman", "book"},
    {"bird", "attacks", "attack", "man", "bag"},       {"monkey", "pushes", "push", "child", "bottle"},
    {"rabbit", "follows", "follow", "chef", "box"},    {"duck", "watches", "watch", "teacher", "phone"},
    {"lamb", "licks", "lick", "student", "plate"},     {"fox", "hits", "hit", "driver", "bowl"},
};

constexpr int kSuiteFrames = 100;
constexpr FrameIndex kPlayFrame = 10;
constexpr FrameIndex kTakeFrame = 49;
constexpr FrameIndex kActFrame = 50;

}  // namespace

CausalSuite write_causal_suite(const fs::path& root) {
  CausalSuite suite;
  suite.root = root;
  suite.bundles = root / "bundles";
  suite.qa = root / "qa.jsonl";
  suite.config = root / "config.json";
  suite.config_no_relations = root / "config_no_relations.json";

  std::string qa_lines;
  std::string script = "# Answers only when both links of the causal chain are in the relation summary.\n";
  for (std::size_t i = 0; i < kCausal.size(); ++i) {
    const auto& c = kCausal[i];
    char id[16];
    std::snprintf(id, sizeof id, "causal-%02zu", i);

    VideoBundle b;
    b.video_id = id;
    b.total_frames = kSuiteFrames;
    b.fps = 1.0;
    for (FrameIndex f = 0; f < kSuiteFrames; ++f) b.captions[f] = "the room is quiet";
    b.captions[kPlayFrame] = "the " + c.animal + " plays with the " + c.object;
    b.captions[kTakeFrame] = "the " + c.person + " takes the " + c.object;
    b.captions[kActFrame] = "the " + c.animal + " " + c.verb_3sg + " the " + c.person;
    save_bundle(b, suite.bundles / id);

    const int answer = 1 + static_cast<int>(i % 4);
    std::vector<std::string> distractors = {"because the " + c.animal + " was hungry",
                                            "because the " + c.person + " was singing",
                                            "because the " + c.object + " fell on the " + c.animal,
                                            "because a door slammed"};
    std::vector<std::string> options(5);
    options[static_cast<std::size_t>(answer)] = "because the " + c.person + " took the " + c.object;
    for (std::size_t o = 0, d = 0; o < options.size(); ++o) {
      if (options[o].empty()) options[o] = distractors[d++];
    }
    QAItem item{id, id, "why did the " + c.animal + " " + c.verb + " the " + c.person + "?", options, answer,
                QACategory::Causal, std::nullopt};
    qa_lines += qa_to_line(item) + "\n";
    suite.items.push_back(item);

    script += "== contains \"" + c.person + " —take→ " + c.object + "\" \"" + c.animal + " —" + c.verb + "→ " +
              c.person + "\"\n";
    script += "reasoning: the " + c.person + " took the " + c.object + " right before the " + c.animal +
              " reacted\nanswer: " + std::string(1, static_cast<char>('A' + answer)) +
              "\nconfidence: 3\nmissing: none\n";
  }
  script += "== default\nreasoning: nothing links the events yet\nanswer: A\nconfidence: 1\nmissing: what happened just before\n";

  write_text(suite.qa, qa_lines);
  write_text(root / "reasoner.txt", script);
  const std::string providers =
      R"("providers": {"reasoner": {"kind": "scripted", "script": "reasoner.txt"}}, "chat_provider": "reasoner")";
  write_text(suite.config, "{" + providers + "}\n");
  write_text(suite.config_no_relations, "{" + providers + R"(, "agent": {"extract_relations": false}})" + "\n");
  return suite;
}

// ---------------------------------------------------------------------------

StubServer::StubServer(std::vector<StubReply> replies)
    : server_(std::make_unique<httplib::Server>()), replies_(std::move(replies)) {
  if (replies_.empty()) replies_.push_back({200, chat_body("answer: A, confidence: 3")});
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    StubReply reply;
    {
      std::lock_guard lock(mutex_);
      bodies_.push_back(req.body);
      auth_.push_back(req.get_header_value("Authorization"));
      reply = replies_[std::min(bodies_.size() - 1, replies_.size() - 1)];
    }
    ++requests_;
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server_->Post("/v1/chat/completions", handler);
  server_->Post("/v1/embeddings", handler);
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("stub server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

StubServer::~StubServer() {
  server_->stop();
  thread_.join();
}

std::vector<std::string> StubServer::bodies() const {
  std::lock_guard lock(mutex_);
  return bodies_;
}

std::vector<std::string> StubServer::auth_headers() const {
  std::lock_guard lock(mutex_);
  return auth_;
}

std::string StubServer::chat_body(const std::string& content) {
  nlohmann::json j = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return j.dump();
}

std::string StubServer::embedding_body(const std::vector<double>& v) {
  nlohmann::json j = {{"data", {{{"index", 0}, {"embedding", v}}}}};
  return j.dump();
}

}  // namespace gva::testing
