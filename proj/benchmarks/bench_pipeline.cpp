// SPDX-License-Identifier: Apache-2.0
// Hot paths of one agent round: caption parsing, graph integration, frame
// scoring and prompt summarization.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "gva/caption_parser.hpp"
#include "gva/frame_selector.hpp"
#include "gva/graph_memory.hpp"

namespace {

using namespace gva;

const std::vector<std::string> kCaptions = {
    "the dog plays with the toy on the floor",
    "#C C picks up the knife from the table",
    "the person takes the toy and the dog barks at the person",
    "a woman in a red coat walks into the kitchen",
    "the boy holds the sword and gets excited",
    "two children sit next to the sofa",
};

Embedding random_unit(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> n;
  Embedding v(dim);
  double norm = 0;
  for (auto& x : v) norm += (x = n(rng)) * x;
  for (auto& x : v) x /= std::sqrt(norm);
  return v;
}

// A graph built from `frames` captioned frames spread over a long video.
VideoGraph build_graph(int frames, int stride) {
  std::vector<FrameRecord> records;
  std::vector<CaptionParse> parses;
  for (int i = 0; i < frames; ++i) {
    const FrameIndex f = i * stride;
    records.push_back({f, kCaptions[static_cast<std::size_t>(i) % kCaptions.size()], std::nullopt});
    parses.push_back(parse_caption(records.back().caption, f));
  }
  return update_graph(VideoGraph{}, records, parses);
}

void BM_ParseCaption(benchmark::State& state) {
  const auto& lex = Lexicon::builtin();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_caption(kCaptions[i++ % kCaptions.size()], 7, lex));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ParseCaption);

void BM_UpdateGraph(benchmark::State& state) {
  const auto base = build_graph(static_cast<int>(state.range(0)), 10);
  const FrameIndex next = static_cast<FrameIndex>(state.range(0)) * 10 + 5;
  const std::vector<FrameRecord> records = {{next, kCaptions[2], std::nullopt}};
  const std::vector<CaptionParse> parses = {parse_caption(kCaptions[2], next)};
  for (auto _ : state) benchmark::DoNotOptimize(update_graph(base, records, parses));
}
BENCHMARK(BM_UpdateGraph)->Arg(5)->Arg(11)->Arg(64);

void BM_SelectFrames(benchmark::State& state) {
  std::mt19937 rng(1);
  const int total = 3600;
  const auto graph = build_graph(11, total / 11);
  const auto query = parse_question("why did the dog bark at the person?", {});
  const Embedding q = random_unit(rng, 256);
  std::vector<Candidate> candidates;
  for (FrameIndex f = 1; static_cast<std::int64_t>(candidates.size()) < state.range(0); f += 3) {
    candidates.push_back({f, random_unit(rng, 256)});
  }
  const std::vector<FrameIndex> selected = {0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_frames(candidates, graph, query, q, selected, total, {}, false));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SelectFrames)->Arg(50)->Arg(200)->Arg(1000);

void BM_Summarize(benchmark::State& state) {
  const auto graph = build_graph(static_cast<int>(state.range(0)), 7);
  const auto query = parse_question("what did the boy hold?", {"a sword", "a toy"});
  for (auto _ : state) benchmark::DoNotOptimize(summarize(graph, query, 6000));
}
BENCHMARK(BM_Summarize)->Arg(11)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
