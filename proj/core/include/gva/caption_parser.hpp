// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gva/types.hpp"

namespace gva {

/// Word lists driving the rule-based extractor. The four predicate classes
/// (spatial prepositions, interaction verbs, action verbs, state verbs) are
/// pairwise disjoint; `load` rejects overlaps. Every entry is lowercase.
///
/// State verbs map a lemma to a state label. The label `*` marks a copular
/// verb ("become", "get") whose state is the next descriptor word after it.
struct Lexicon {
  std::set<std::string> spatial_preps;
  std::set<std::string> interaction_verbs;
  std::set<std::string> action_verbs;
  std::map<std::string, std::string> state_verbs;
  std::map<std::string, EntityType> type_gazetteer;
  /// Determiners, pronouns, auxiliaries and other function words.
  std::set<std::string> stop_words;
  /// Adjectives/adverbs that must never be read as nouns ("angry", "quickly").
  std::set<std::string> descriptors;

  static constexpr std::string_view kCopular = "*";

  /// Loads the directory layout shipped under data/lexicon.
  static Lexicon load(const std::filesystem::path& directory);
  /// Lexicon from the installed/default data directory.
  static const Lexicon& builtin();

  /// Throws Error(Config) if predicate classes overlap or an entry is not lowercase.
  void validate() const;

  bool is_verb(std::string_view lemma) const;
  bool is_predicate_word(std::string_view lemma) const;
  std::optional<RelationCategory> category_of(std::string_view lemma) const;
  /// True if the word is known to any list, including the gazetteer.
  bool knows(std::string_view word) const;
};

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

struct Mention {
  std::string surface;
  std::string lemma;
  EntityType entity_type = EntityType::Unknown;
  CharSpan char_span;

  bool operator==(const Mention&) const = default;
};

struct ExtractedTriple {
  Mention subject;
  std::string predicate;
  RelationCategory category = RelationCategory::Action;
  Mention object;

  bool operator==(const ExtractedTriple&) const = default;
};

struct StateEvent {
  Mention mention;
  std::string state;

  bool operator==(const StateEvent&) const = default;
};

struct CaptionParse {
  FrameIndex frame_index = 0;
  std::vector<Mention> mentions;
  std::vector<ExtractedTriple> triples;
  std::vector<StateEvent> state_events;

  bool operator==(const CaptionParse&) const = default;
};

struct QueryParse {
  std::vector<Mention> entities;
  std::vector<std::pair<std::string, RelationCategory>> predicates;
  std::string raw_question;

  bool operator==(const QueryParse&) const = default;
  bool mentions_lemma(std::string_view lemma) const;
};

/// Mentions in caption order, one per distinct lemma (first occurrence kept).
/// Types are left `Unknown`; classify_entity assigns them.
std::vector<Mention> extract_mentions(std::string_view caption, const Lexicon& lex = Lexicon::builtin());

EntityType classify_entity(const Mention& mention, const Lexicon& lex = Lexicon::builtin());

/// Links consecutive mentions (within one sentence) through the predicate
/// words between them. Verbs take precedence over prepositions; when no verb
/// sits between a pair, the first spatial preposition does.
std::vector<ExtractedTriple> extract_triples(std::string_view caption, const std::vector<Mention>& mentions,
                                             const Lexicon& lex = Lexicon::builtin());

CaptionParse parse_caption(std::string_view caption, FrameIndex frame_index, const Lexicon& lex = Lexicon::builtin());

QueryParse parse_question(std::string_view question, const std::vector<std::string>& options,
                          const Lexicon& lex = Lexicon::builtin());

/// Lemma for a single lowercase word using the suffix table (-s, -es, -ies,
/// -ing, -ed). Known words are returned unchanged.
std::string lemmatize(std::string_view word, const Lexicon& lex);

}  // namespace gva
