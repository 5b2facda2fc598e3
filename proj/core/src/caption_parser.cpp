// SPDX-License-Identifier: Apache-2.0
#include "gva/caption_parser.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <unordered_map>

#include "gva/config.hpp"
#include "gva/error.hpp"

namespace gva {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Reads `path` and returns (line number, content) for every non-comment line.
std::vector<std::pair<int, std::string>> read_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "lexicon file not found: " + path.string());
  std::vector<std::pair<int, std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    // keep tabs inside the entry; only the outer whitespace goes
    view = trim(view);
    if (!view.empty()) out.emplace_back(line_no, std::string(view));
  }
  return out;
}

std::set<std::string> read_word_set(const std::filesystem::path& path) {
  std::set<std::string> out;
  for (auto& [line_no, entry] : read_entries(path)) out.insert(to_lower(entry));
  return out;
}

std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [line_no, entry] : read_entries(path)) {
    auto tab = entry.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::Config,
                  path.string() + ":" + std::to_string(line_no) + ": expected lemma<TAB>value");
    }
    out.emplace_back(to_lower(trim(std::string_view(entry).substr(0, tab))),
                     std::string(trim(std::string_view(entry).substr(tab + 1))));
  }
  return out;
}

enum class TokenClass { Stop, Noun, Verb, Preposition, StateVerb, Descriptor };

struct Token {
  std::string lower;
  std::string lemma;
  std::size_t start = 0;
  std::size_t end = 0;
  int sentence = 0;
  TokenClass cls = TokenClass::Stop;
};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?' || c == ';'; }

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Words joining two clauses that share a subject ("holds the sword and gets excited").
constexpr std::array<std::string_view, 4> kCoordinators = {"and", "then", "but", "while"};

bool is_coordinator(std::string_view w) {
  return std::find(kCoordinators.begin(), kCoordinators.end(), w) != kCoordinators.end();
}

TokenClass classify_token(const std::string& lower, const std::string& lemma, const Lexicon& lex) {
  if (lex.type_gazetteer.count(lower) || lex.type_gazetteer.count(lemma)) return TokenClass::Noun;
  if (lex.state_verbs.count(lower) || lex.state_verbs.count(lemma)) return TokenClass::StateVerb;
  if (auto cat = lex.category_of(lemma)) {
    return *cat == RelationCategory::Spatial ? TokenClass::Preposition : TokenClass::Verb;
  }
  if (lex.stop_words.count(lower) || all_digits(lower)) return TokenClass::Stop;
  if (lex.descriptors.count(lower) || lex.descriptors.count(lemma)) return TokenClass::Descriptor;
  return TokenClass::Noun;
}

std::vector<Token> tokenize(std::string_view text, const Lexicon& lex) {
  std::vector<Token> tokens;
  int sentence = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    if (!is_word_byte(c)) {
      if (is_sentence_end(text[i])) ++sentence;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size()) {
      auto cj = static_cast<unsigned char>(text[j]);
      if (is_word_byte(cj)) {
        ++j;
      } else if (cj == '-' && j + 1 < text.size() && is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
        ++j;  // hyphenated compound
      } else {
        break;
      }
    }
    Token tok;
    tok.lower = to_lower(text.substr(i, j - i));
    tok.start = i;
    tok.end = j;
    tok.sentence = sentence;
    // lexicon-listed forms (is/are/was) are looked up before lemmatizing
    tok.lemma = lex.state_verbs.count(tok.lower) ? tok.lower : lemmatize(tok.lower, lex);
    tok.cls = classify_token(tok.lower, tok.lemma, lex);
    tokens.push_back(std::move(tok));
    i = j;
  }
  return tokens;
}

// Tokens of `caption` that realise one of `mentions`, keyed back to it.
std::vector<std::pair<std::size_t, const Mention*>> mention_occurrences(const std::vector<Token>& tokens,
                                                                       const std::vector<Mention>& mentions) {
  std::unordered_map<std::string, const Mention*> by_lemma;
  for (const auto& m : mentions) by_lemma.emplace(m.lemma, &m);
  std::vector<std::pair<std::size_t, const Mention*>> out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].cls != TokenClass::Noun) continue;
    if (auto it = by_lemma.find(tokens[t].lemma); it != by_lemma.end()) out.emplace_back(t, it->second);
  }
  return out;
}

std::vector<ExtractedTriple> triples_from_tokens(const std::vector<Token>& tokens, const std::vector<Mention>& mentions,
                                                 const Lexicon& lex) {
  auto occ = mention_occurrences(tokens, mentions);
  std::vector<std::pair<std::size_t, ExtractedTriple>> found;
  for (std::size_t k = 0; k + 1 < occ.size(); ++k) {
    auto [left, subj] = occ[k];
    auto [right, obj] = occ[k + 1];
    if (tokens[left].sentence != tokens[right].sentence) continue;
    if (subj->lemma == obj->lemma) continue;

    bool any_verb = false;
    for (auto t = left + 1; t < right; ++t) any_verb |= tokens[t].cls == TokenClass::Verb;

    for (auto t = left + 1; t < right; ++t) {
      const auto& tok = tokens[t];
      if (any_verb ? tok.cls != TokenClass::Verb : tok.cls != TokenClass::Preposition) continue;
      found.emplace_back(t, ExtractedTriple{*subj, tok.lemma, *lex.category_of(tok.lemma), *obj});
      if (!any_verb) break;  // only the first preposition links a verbless pair
    }
  }
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ExtractedTriple> out;
  for (auto& [pos, triple] : found) {
    if (std::find(out.begin(), out.end(), triple) == out.end()) out.push_back(std::move(triple));
  }
  return out;
}

// Subject of a state verb at token `verb`: the nearest mention to its left in
// the same sentence, except that after a coordinator with no new subject
// ("X holds Y and gets excited") the subject of the preceding clause is used.
const Mention* state_subject(const std::vector<Token>& tokens,
                             const std::vector<std::pair<std::size_t, const Mention*>>& occ, std::size_t verb) {
  auto nearest_left = [&](std::size_t pos) -> std::optional<std::pair<std::size_t, const Mention*>> {
    std::optional<std::pair<std::size_t, const Mention*>> best;
    for (const auto& o : occ) {
      if (o.first < pos && tokens[o.first].sentence == tokens[pos].sentence) best = o;
    }
    return best;
  };
  auto near = nearest_left(verb);
  if (!near) return nullptr;

  std::optional<std::size_t> coord;
  for (auto t = near->first + 1; t < verb; ++t) {
    if (is_coordinator(tokens[t].lower)) coord = t;
  }
  if (!coord) return near->second;

  // walk back from the coordinator to the verb governing the previous clause
  for (auto t = *coord; t-- > 0;) {
    if (tokens[t].sentence != tokens[verb].sentence) break;
    if (tokens[t].cls == TokenClass::Verb || tokens[t].cls == TokenClass::StateVerb) {
      if (auto subj = nearest_left(t)) return subj->second;
      break;
    }
  }
  return near->second;
}

std::vector<StateEvent> state_events_from_tokens(const std::vector<Token>& tokens, const std::vector<Mention>& mentions,
                                                 const Lexicon& lex) {
  auto occ = mention_occurrences(tokens, mentions);
  std::vector<StateEvent> out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].cls != TokenClass::StateVerb) continue;
    auto entry = lex.state_verbs.find(tokens[t].lemma);
    if (entry == lex.state_verbs.end()) entry = lex.state_verbs.find(tokens[t].lower);
    if (entry == lex.state_verbs.end()) continue;

    std::string label = entry->second;
    if (label == Lexicon::kCopular) {
      label.clear();
      for (auto u = t + 1; u < tokens.size() && tokens[u].sentence == tokens[t].sentence; ++u) {
        if (tokens[u].cls == TokenClass::Stop) continue;
        if (tokens[u].cls == TokenClass::Descriptor) label = tokens[u].lower;
        break;
      }
      if (label.empty()) continue;
    }
    const Mention* subject = state_subject(tokens, occ, t);
    if (!subject) continue;
    StateEvent ev{*subject, label};
    if (std::find(out.begin(), out.end(), ev) == out.end()) out.push_back(std::move(ev));
  }
  return out;
}

std::vector<Mention> mentions_from_tokens(std::string_view text, const std::vector<Token>& tokens) {
  std::vector<Mention> out;
  for (const auto& tok : tokens) {
    if (tok.cls != TokenClass::Noun || tok.lemma.empty()) continue;
    bool seen = std::any_of(out.begin(), out.end(), [&](const Mention& m) { return m.lemma == tok.lemma; });
    if (seen) continue;
    out.push_back(Mention{std::string(text.substr(tok.start, tok.end - tok.start)), tok.lemma, EntityType::Unknown,
                          CharSpan{tok.start, tok.end}});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Lexicon

Lexicon Lexicon::load(const std::filesystem::path& directory) {
  Lexicon lex;
  lex.spatial_preps = read_word_set(directory / "spatial_preps.txt");
  lex.interaction_verbs = read_word_set(directory / "interaction_verbs.txt");
  lex.action_verbs = read_word_set(directory / "action_verbs.txt");
  for (auto& [lemma, label] : read_pairs(directory / "state_verbs.tsv")) lex.state_verbs[lemma] = to_lower(label);
  for (auto& [lemma, type] : read_pairs(directory / "entity_types.tsv")) {
    try {
      lex.type_gazetteer[lemma] = entity_type_from_string(type);
    } catch (const Error&) {
      throw Error(ErrorKind::Config, "entity_types.tsv: unknown entity type '" + type + "' for '" + lemma + "'");
    }
  }
  if (std::filesystem::exists(directory / "stop_words.txt")) {
    lex.stop_words = read_word_set(directory / "stop_words.txt");
  }
  if (std::filesystem::exists(directory / "descriptors.txt")) {
    lex.descriptors = read_word_set(directory / "descriptors.txt");
  }
  lex.validate();
  return lex;
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = Lexicon::load(default_data_dir() / "lexicon");
  return lex;
}

void Lexicon::validate() const {
  std::vector<std::pair<std::string_view, std::set<std::string>>> classes = {
      {"spatial", spatial_preps}, {"interaction", interaction_verbs}, {"action", action_verbs}, {"state", {}}};
  for (const auto& [lemma, label] : state_verbs) classes[3].second.insert(lemma);

  for (const auto& [name, words] : classes) {
    for (const auto& w : words) {
      if (w.empty() || to_lower(w) != w) {
        throw Error(ErrorKind::Config, "lexicon entry '" + w + "' in " + std::string(name) + " is not lowercase");
      }
    }
  }
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      for (const auto& w : classes[a].second) {
        if (classes[b].second.count(w)) {
          throw Error(ErrorKind::Config, "lexicon conflict: '" + w + "' is both " + std::string(classes[a].first) +
                                             " and " + std::string(classes[b].first));
        }
      }
    }
  }
}

std::optional<RelationCategory> Lexicon::category_of(std::string_view lemma) const {
  std::string key(lemma);
  if (spatial_preps.count(key)) return RelationCategory::Spatial;
  if (interaction_verbs.count(key)) return RelationCategory::Interaction;
  if (action_verbs.count(key)) return RelationCategory::Action;
  return std::nullopt;
}

bool Lexicon::is_verb(std::string_view lemma) const {
  auto cat = category_of(lemma);
  return cat && *cat != RelationCategory::Spatial;
}

bool Lexicon::is_predicate_word(std::string_view lemma) const {
  return category_of(lemma).has_value() || state_verbs.count(std::string(lemma));
}

bool Lexicon::knows(std::string_view word) const {
  std::string key(word);
  return is_predicate_word(key) || type_gazetteer.count(key) || stop_words.count(key) || descriptors.count(key);
}

// ---------------------------------------------------------------------------
// Extraction

std::string lemmatize(std::string_view word, const Lexicon& lex) {
  std::string w = to_lower(word);
  if (w.empty() || lex.knows(w)) return w;

  std::vector<std::string> candidates;
  auto stem = [&](std::size_t n) { return w.substr(0, w.size() - n); };
  if (ends_with(w, "ies") && w.size() > 4) candidates.push_back(stem(3) + "y");
  if (ends_with(w, "es") && w.size() > 3) candidates.push_back(stem(2));
  if (ends_with(w, "s") && !ends_with(w, "ss") && w.size() > 2) candidates.push_back(stem(1));
  if (ends_with(w, "ing") && w.size() > 4) {
    auto s = stem(3);
    candidates.push_back(s);
    candidates.push_back(s + "e");
    if (s.size() > 2 && s[s.size() - 1] == s[s.size() - 2]) candidates.push_back(s.substr(0, s.size() - 1));
  }
  if (ends_with(w, "ied") && w.size() > 4) candidates.push_back(stem(3) + "y");
  if (ends_with(w, "ed") && w.size() > 3) {
    auto s = stem(2);
    candidates.push_back(s);
    candidates.push_back(stem(1));
    if (s.size() > 2 && s[s.size() - 1] == s[s.size() - 2]) candidates.push_back(s.substr(0, s.size() - 1));
  }
  for (const auto& c : candidates) {
    if (lex.knows(c)) return c;
  }

  // Unknown word: assume a noun and singularise conservatively.
  if (ends_with(w, "ies") && w.size() > 4) return stem(3) + "y";
  for (std::string_view sib : {"ches", "shes", "xes", "sses", "zes"}) {
    if (ends_with(w, sib)) return stem(2);
  }
  if (ends_with(w, "s") && w.size() > 3 && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
    return stem(1);
  }
  return w;
}

std::vector<Mention> extract_mentions(std::string_view caption, const Lexicon& lex) {
  if (caption.empty()) return {};
  return mentions_from_tokens(caption, tokenize(caption, lex));
}

EntityType classify_entity(const Mention& mention, const Lexicon& lex) {
  auto it = lex.type_gazetteer.find(mention.lemma);
  if (it == lex.type_gazetteer.end()) return EntityType::Object;
  if (it->second == EntityType::Person && to_lower(mention.surface) != mention.lemma &&
      !lex.type_gazetteer.count(to_lower(mention.surface))) {
    return EntityType::Group;  // "boys", "kids"
  }
  return it->second;
}

std::vector<ExtractedTriple> extract_triples(std::string_view caption, const std::vector<Mention>& mentions,
                                             const Lexicon& lex) {
  if (mentions.size() < 2) return {};
  return triples_from_tokens(tokenize(caption, lex), mentions, lex);
}

CaptionParse parse_caption(std::string_view caption, FrameIndex frame_index, const Lexicon& lex) {
  if (frame_index < 0) throw Error(ErrorKind::InvalidArgument, "parse_caption: negative frame index");
  CaptionParse parse;
  parse.frame_index = frame_index;
  if (caption.empty()) return parse;

  auto tokens = tokenize(caption, lex);
  parse.mentions = mentions_from_tokens(caption, tokens);
  for (auto& m : parse.mentions) m.entity_type = classify_entity(m, lex);
  if (parse.mentions.size() >= 2) parse.triples = triples_from_tokens(tokens, parse.mentions, lex);
  parse.state_events = state_events_from_tokens(tokens, parse.mentions, lex);
  return parse;
}

bool QueryParse::mentions_lemma(std::string_view lemma) const {
  return std::any_of(entities.begin(), entities.end(), [&](const Mention& m) { return m.lemma == lemma; });
}

QueryParse parse_question(std::string_view question, const std::vector<std::string>& options, const Lexicon& lex) {
  QueryParse q;
  q.raw_question = std::string(question);

  auto absorb = [&](std::string_view text) {
    auto tokens = tokenize(text, lex);
    auto mentions = mentions_from_tokens(text, tokens);
    for (auto& m : mentions) {
      if (q.mentions_lemma(m.lemma)) continue;
      m.entity_type = classify_entity(m, lex);
      q.entities.push_back(m);
    }
    auto add_pred = [&](const std::string& lemma, RelationCategory cat) {
      auto it = std::find_if(q.predicates.begin(), q.predicates.end(), [&](const auto& p) { return p.first == lemma; });
      if (it == q.predicates.end()) q.predicates.emplace_back(lemma, cat);
    };
    // verbs always count; prepositions only when they link two mentions
    for (const auto& tok : tokens) {
      if (tok.cls == TokenClass::Verb) add_pred(tok.lemma, *lex.category_of(tok.lemma));
    }
    for (const auto& t : triples_from_tokens(tokens, mentions, lex)) add_pred(t.predicate, t.category);
  };

  absorb(question);
  for (const auto& opt : options) absorb(opt);
  return q;
}

}  // namespace gva
