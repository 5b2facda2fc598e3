// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gva/caption_parser.hpp"
#include "gva/config.hpp"
#include "gva/error.hpp"
#include "support.hpp"

using namespace gva;
namespace gt = gva::testing;

namespace {

std::set<std::string> lemmas(const std::vector<Mention>& ms) {
  std::set<std::string> out;
  for (const auto& m : ms) out.insert(m.lemma);
  return out;
}

struct T {
  std::string s, p, o;
  RelationCategory c;
  bool operator==(const T&) const = default;
};

std::vector<T> flat(const std::vector<ExtractedTriple>& ts) {
  std::vector<T> out;
  for (const auto& t : ts) out.push_back({t.subject.lemma, t.predicate, t.object.lemma, t.category});
  return out;
}

std::vector<T> triples_of(const std::string& caption) { return flat(parse_caption(caption, 0).triples); }

}  // namespace

TEST(Lexicon, BuiltinIsValidAndDisjoint) {
  const auto& lex = Lexicon::builtin();
  EXPECT_NO_THROW(lex.validate());
  for (const auto& w : lex.interaction_verbs) {
    EXPECT_FALSE(lex.action_verbs.count(w)) << w;
    EXPECT_FALSE(lex.spatial_preps.count(w)) << w;
    EXPECT_FALSE(lex.state_verbs.count(w)) << w;
  }
  for (const auto& w : lex.action_verbs) {
    EXPECT_FALSE(lex.spatial_preps.count(w)) << w;
    EXPECT_FALSE(lex.state_verbs.count(w)) << w;
  }
  EXPECT_TRUE(lex.interaction_verbs.count("bark"));
  EXPECT_TRUE(lex.interaction_verbs.count("talk"));
  EXPECT_EQ(lex.category_of("take"), RelationCategory::Action);
  EXPECT_EQ(lex.category_of("on"), RelationCategory::Spatial);
}

TEST(Lexicon, OverlapIsRejectedAtLoad) {
  gt::TempDir dir;
  const auto src = default_data_dir() / "lexicon";
  for (const auto& e : std::filesystem::directory_iterator(src)) {
    std::filesystem::copy_file(e.path(), dir.path() / e.path().filename());
  }
  auto actions = gt::read_text(dir / "action_verbs.txt");
  gt::write_text(dir / "action_verbs.txt", actions + "\nbark\n");
  try {
    Lexicon::load(dir.path());
    FAIL() << "expected a configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("bark"), std::string::npos);
  }
}

TEST(Lexicon, UppercaseEntryIsRejected) {
  Lexicon lex;
  lex.action_verbs = {"Take"};
  EXPECT_THROW(lex.validate(), Error);
}

TEST(Lemmatize, SuffixTable) {
  const auto& lex = Lexicon::builtin();
  EXPECT_EQ(lemmatize("takes", lex), "take");
  EXPECT_EQ(lemmatize("barks", lex), "bark");
  EXPECT_EQ(lemmatize("watches", lex), "watch");
  EXPECT_EQ(lemmatize("holding", lex), "hold");
  EXPECT_EQ(lemmatize("opened", lex), "open");
  EXPECT_EQ(lemmatize("cried", lex), "cry");
  EXPECT_EQ(lemmatize("dogs", lex), "dog");
  EXPECT_EQ(lemmatize("person", lex), "person");
}

TEST(ExtractMentions, DropsDeterminersAndPronouns) {
  auto ms = extract_mentions("The dog shows its angry face towards the person");
  EXPECT_EQ(lemmas(ms), (std::set<std::string>{"dog", "face", "person"}));
  ASSERT_EQ(ms.size(), 3u);
  EXPECT_EQ(ms[0].lemma, "dog");
  EXPECT_EQ(ms[1].lemma, "face");
  EXPECT_EQ(ms[2].lemma, "person");
}

TEST(ExtractMentions, EmptyCaption) { EXPECT_TRUE(extract_mentions("").empty()); }

TEST(ExtractMentions, DeterministicAndInOrder) {
  const std::string caption = "a person takes the toy from the dog";
  auto first = extract_mentions(caption);
  EXPECT_EQ(lemmas(first), (std::set<std::string>{"person", "toy", "dog"}));
  EXPECT_EQ(first, extract_mentions(caption));
}

TEST(ExtractMentions, SpansPointAtSurface) {
  const std::string caption = "Two Dogs chase the ball";
  for (const auto& m : extract_mentions(caption)) {
    ASSERT_LT(m.char_span.start, m.char_span.end);
    ASSERT_LE(m.char_span.end, caption.size());
    EXPECT_EQ(caption.substr(m.char_span.start, m.char_span.end - m.char_span.start), m.surface);
  }
}

TEST(ClassifyEntity, GazetteerAndDefault) {
  auto mention = [](std::string lemma, std::string surface = {}) {
    Mention m;
    m.lemma = lemma;
    m.surface = surface.empty() ? lemma : surface;
    return m;
  };
  EXPECT_EQ(classify_entity(mention("person")), EntityType::Person);
  EXPECT_EQ(classify_entity(mention("zxqv")), EntityType::Object);
  EXPECT_EQ(classify_entity(mention("children")), EntityType::Group);
  EXPECT_EQ(classify_entity(mention("kitchen")), EntityType::Location);
  // a plural surface of a person noun names a group
  EXPECT_EQ(classify_entity(mention("boy", "boys")), EntityType::Group);
}

TEST(ExtractTriples, ActionVerb) {
  EXPECT_EQ(triples_of("the person takes the toy"), (std::vector<T>{{"person", "take", "toy", RelationCategory::Action}}));
}

TEST(ExtractTriples, InteractionVerbBeatsPreposition) {
  EXPECT_EQ(triples_of("the dog barks at the person"),
            (std::vector<T>{{"dog", "bark", "person", RelationCategory::Interaction}}));
}

TEST(ExtractTriples, SpatialWhenNoVerb) {
  EXPECT_EQ(triples_of("the cup on the table"), (std::vector<T>{{"cup", "on", "table", RelationCategory::Spatial}}));
}

TEST(ExtractTriples, FewerThanTwoMentions) { EXPECT_TRUE(triples_of("a dog").empty()); }

TEST(ExtractTriples, DoesNotCrossSentences) {
  EXPECT_TRUE(triples_of("the man holds. the dog chases").empty());
  auto ts = triples_of("the man holds the cup. the dog watches the door");
  EXPECT_EQ(ts, (std::vector<T>{{"man", "hold", "cup", RelationCategory::Action},
                                {"dog", "watch", "door", RelationCategory::Interaction}}));
}

TEST(ParseCaption, StateEvent) {
  auto p = parse_caption("the dog becomes angry", 41);
  EXPECT_EQ(p.frame_index, 41);
  ASSERT_EQ(p.state_events.size(), 1u);
  EXPECT_EQ(p.state_events[0].mention.lemma, "dog");
  EXPECT_EQ(p.state_events[0].state, "angry");
}

TEST(ParseCaption, Empty) {
  auto p = parse_caption("", 0);
  EXPECT_EQ(p.frame_index, 0);
  EXPECT_TRUE(p.mentions.empty());
  EXPECT_TRUE(p.triples.empty());
  EXPECT_TRUE(p.state_events.empty());
}

TEST(ParseCaption, CoordinatedStateChange) {
  auto p = parse_caption("the boy holds the sword and gets excited", 55);
  EXPECT_EQ(flat(p.triples), (std::vector<T>{{"boy", "hold", "sword", RelationCategory::Action}}));
  ASSERT_EQ(p.state_events.size(), 1u);
  EXPECT_EQ(p.state_events[0].mention.lemma, "boy");
  EXPECT_EQ(p.state_events[0].state, "excited");
}

TEST(ParseCaption, LabelledStateVerb) {
  auto p = parse_caption("the girl cries", 3);
  ASSERT_EQ(p.state_events.size(), 1u);
  EXPECT_EQ(p.state_events[0].state, "sad");
}

TEST(ParseQuestion, EntitiesAndPredicates) {
  auto q = parse_question("why did the dog bark at the person?", {});
  EXPECT_EQ(lemmas(q.entities), (std::set<std::string>{"dog", "person"}));
  ASSERT_EQ(q.predicates.size(), 1u);
  EXPECT_EQ(q.predicates[0], (std::pair<std::string, RelationCategory>{"bark", RelationCategory::Interaction}));
}

TEST(ParseQuestion, DefaultTyping) {
  auto q = parse_question("what color?", {});
  ASSERT_EQ(q.entities.size(), 1u);
  EXPECT_EQ(q.entities[0].lemma, "color");
  EXPECT_EQ(q.entities[0].entity_type, EntityType::Object);
}

TEST(ParseQuestion, OptionsContributeEntities) {
  auto q = parse_question("why did the dog bark?", {"the person took the toy", "it was hungry"});
  EXPECT_TRUE(q.mentions_lemma("toy"));
  EXPECT_TRUE(q.mentions_lemma("person"));
  EXPECT_TRUE(q.mentions_lemma("dog"));
}

// Structural invariants over random captions.
TEST(CaptionParserProperty, Invariants) {
  std::mt19937 rng(7);
  const auto& lex = Lexicon::builtin();
  for (int i = 0; i < 500; ++i) {
    auto caption = gt::random_caption(rng, i % 2 == 0);
    auto p = parse_caption(caption, i);
    auto again = parse_caption(caption, i);
    ASSERT_EQ(p, again) << caption;
    std::set<std::string> seen;
    for (const auto& m : p.mentions) {
      ASSERT_FALSE(m.lemma.empty());
      ASSERT_LT(m.char_span.start, m.char_span.end);
      ASSERT_LE(m.char_span.end, caption.size());
      ASSERT_NE(m.entity_type, EntityType::Unknown);
      ASSERT_TRUE(seen.insert(m.lemma).second) << "duplicate mention " << m.lemma;
    }
    for (const auto& t : p.triples) {
      ASSERT_NE(t.subject.lemma, t.object.lemma);
      ASSERT_TRUE(seen.count(t.subject.lemma) && seen.count(t.object.lemma)) << caption;
      ASSERT_EQ(lex.category_of(t.predicate), t.category) << t.predicate;
    }
  }
}

// Adding a verb that never appears as a mention cannot remove verb triples.
TEST(CaptionParserProperty, AddingAVerbKeepsVerbTriples) {
  Lexicon lex = Lexicon::builtin();
  const std::vector<std::string> captions = {"the man zorps the cup", "the dog barks at the person",
                                             "the chef holds the knife and zorps the bowl"};
  std::vector<std::vector<T>> before;
  for (const auto& c : captions) before.push_back(flat(parse_caption(c, 0, lex).triples));
  lex.action_verbs.insert("zorp");
  for (std::size_t i = 0; i < captions.size(); ++i) {
    auto after = flat(parse_caption(captions[i], 0, lex).triples);
    for (const auto& t : before[i]) {
      if (t.c == RelationCategory::Spatial) continue;
      EXPECT_NE(std::find(after.begin(), after.end(), t), after.end()) << captions[i] << ": lost " << t.p;
    }
  }
  auto zorp = flat(parse_caption("the man zorps the cup", 0, lex).triples);
  EXPECT_EQ(zorp, (std::vector<T>{{"man", "zorp", "cup", RelationCategory::Action}}));
}
