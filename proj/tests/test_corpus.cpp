// Copyright 2026 The docinstruct Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "docinstruct/corpus.hpp"
#include "fixtures.hpp"

using namespace docinstruct;
using fixtures::TempDir;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += stem + std::to_string(i);
  }
  return s;
}

void write(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST(Common, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Common, ContentIdIgnoresCaseAndWhitespaceRuns) {
  EXPECT_EQ(content_id("Ice  floats\n on water"), content_id("ice floats on WATER"));
  EXPECT_NE(content_id("ice floats"), content_id("ice sinks"));
  EXPECT_EQ(content_id("x").size(), 16u);
}

TEST(Common, WordCountIsWhitespaceTokens) {
  EXPECT_EQ(word_count(""), 0u);
  EXPECT_EQ(word_count("  a\tb\n\nc  "), 3u);
  EXPECT_EQ(trim("\n x y \t"), "x y");
}

TEST(Common, RngIsDeterministicAndBounded) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    EXPECT_EQ(x, b.below(7));
    EXPECT_LT(x, 7u);
  }
  Rng c(9);
  auto s = c.sample_without_replacement(50, 20);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  EXPECT_LT(s.back(), 50u);
  EXPECT_THROW(c.sample_without_replacement(3, 4), PreconditionError);
}

TEST(Common, AtomicWriteReplacesContent) {
  TempDir dir("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  EXPECT_THROW(read_file(dir / "missing"), IoError);
}

TEST(Jsonl, MalformedLinesReportedWithLineNumbers) {
  std::vector<LineError> errors;
  auto rows = parse_jsonl("{\"a\":1}\n\n{broken\n{\"a\":2}\n", errors);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].line, 4u);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].line, 3u);
}

TEST(Jsonl, RoundTrip) {
  TempDir dir("jsonl");
  std::vector<Json> rows = {Json{{"k", "v\nw"}}, Json{{"n", 3}}};
  write_jsonl_atomic(dir / "x.jsonl", rows);
  EXPECT_EQ(read_jsonl_strict(dir / "x.jsonl"), rows);
  write(dir / "bad.jsonl", "{}\nnope\n");
  EXPECT_THROW(read_jsonl_strict(dir / "bad.jsonl"), IoError);
}

TEST(LoadSources, JsonlKeepsFileOrder) {
  TempDir dir("load");
  write(dir / "c.jsonl",
        "{\"content\":\"first\"}\n{\"text\":\"second\",\"url\":\"u\"}\n{\"content\":\"third\"}\n");
  auto r = load_sources(dir / "c.jsonl", SourceFormat::kJsonl);
  ASSERT_EQ(r.sources.size(), 3u);
  EXPECT_EQ(r.sources[0].text, "first");
  EXPECT_EQ(r.sources[1].text, "second");
  EXPECT_EQ(r.sources[1].origin, "u");
  EXPECT_EQ(r.sources[2].source_id, "c.jsonl#3");
  EXPECT_TRUE(r.skipped.empty());
}

TEST(LoadSources, EmptyFileGivesNothing) {
  TempDir dir("load");
  write(dir / "e.jsonl", "");
  auto r = load_sources(dir / "e.jsonl", SourceFormat::kJsonl);
  EXPECT_TRUE(r.sources.empty());
  EXPECT_TRUE(r.skipped.empty());
}

TEST(LoadSources, OneMalformedOfFive) {
  TempDir dir("load");
  write(dir / "m.jsonl",
        "{\"content\":\"a\"}\n{\"content\":\"b\"}\n{oops\n{\"content\":\"c\"}\n{\"content\":\"d\"}\n");
  auto r = load_sources(dir / "m.jsonl", SourceFormat::kJsonl);
  EXPECT_EQ(r.sources.size(), 4u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].line, 3u);
}

TEST(LoadSources, DirectoryLexicographic) {
  TempDir dir("load");
  std::filesystem::create_directories(dir / "sub");
  write(dir / "b.txt", "bee");
  write(dir / "a.txt", "ay");
  write(dir / "sub/c.txt", "sea");
  auto r = load_sources(dir.path(), SourceFormat::kPlainTextDir);
  ASSERT_EQ(r.sources.size(), 3u);
  EXPECT_EQ(r.sources[0].source_id, "a.txt");
  EXPECT_EQ(r.sources[1].source_id, "b.txt");
  EXPECT_EQ(r.sources[2].source_id, "sub/c.txt");
  EXPECT_THROW(load_sources(dir / "nope", SourceFormat::kJsonl), IoError);
}

TEST(Segment, SingleParagraphFits) {
  SegmentationPolicy p{50, 200, SplitMode::kParagraph, 256};
  auto docs = segment({"s", words(100), ""}, p);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].word_count, 100u);
  EXPECT_TRUE(docs[0].kept);
}

TEST(Segment, OversizedParagraphHardSplits) {
  SegmentationPolicy p{64, 200, SplitMode::kParagraph, 256};
  auto docs = segment({"s", words(500), ""}, p);
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[0].word_count, 200u);
  EXPECT_EQ(docs[1].word_count, 200u);
  EXPECT_EQ(docs[2].word_count, 100u);
}

TEST(Segment, ShortParagraphsMerge) {
  SegmentationPolicy p{50, 200, SplitMode::kParagraph, 256};
  auto docs = segment({"s", words(30, "a") + "\n\n" + words(30, "b"), ""}, p);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].word_count, 60u);
}

TEST(Segment, UndersizedSourceFlagged) {
  SegmentationPolicy p{50, 200, SplitMode::kParagraph, 256};
  auto docs = segment({"s", words(10), ""}, p);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_FALSE(docs[0].kept);
  EXPECT_THROW(segment({"s", "x", ""}, SegmentationPolicy{10, 10}), PreconditionError);
}

TEST(Segment, SlidingWindow) {
  SegmentationPolicy p{10, 100, SplitMode::kSlidingWindow, 40};
  auto docs = segment({"s", words(100), ""}, p);
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[2].word_count, 20u);
}

// Property: chunks are verbatim slices whose collapsed concatenation equals
// the collapsed source, and no chunk exceeds max_words.
TEST(SegmentProperty, RoundTripAndBounds) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int paras = 1 + static_cast<int>(gen() % 8);
    for (int p = 0; p < paras; ++p) {
      if (p) text += std::string(2 + gen() % 3, '\n');
      text += words(1 + gen() % 300, "t" + std::to_string(p) + "_");
      if (gen() % 2) text += "  \t";
    }
    SegmentationPolicy pol{1 + gen() % 80, 0, SplitMode::kParagraph, 256};
    pol.max_words = pol.min_words + 1 + gen() % 200;
    if (gen() % 3 == 0) {
      pol.split_on = SplitMode::kSlidingWindow;
      pol.window_words = 1 + gen() % 120;
    }
    const auto docs = segment({"s", text, ""}, pol);
    std::string joined;
    std::size_t pos = 0;
    for (const auto& d : docs) {
      EXPECT_LE(d.word_count, pol.max_words);
      EXPECT_GE(d.word_count, 1u);
      EXPECT_EQ(d.word_count, word_count(d.text));
      const auto at = text.find(d.text, pos);
      ASSERT_NE(at, std::string::npos);
      pos = at + d.text.size();
      joined += d.text + "\n";
    }
    EXPECT_EQ(collapse_whitespace(joined), collapse_whitespace(text));
    EXPECT_EQ(docs, segment({"s", text, ""}, pol));
  }
}

TEST(Dedup, KeepsFirstOccurrence) {
  auto a = make_document("Alpha beta", "1");
  auto b = make_document("gamma", "2");
  auto a2 = make_document("alpha   BETA", "3");
  std::vector<Document> in = {a, a, b, a2};
  auto out = exact_dedup(in);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].source_id, "1");
  EXPECT_EQ(out[1].source_id, "2");
  EXPECT_EQ(exact_dedup(out), out);
}

TEST(Dedup, PlantedDuplicates) {
  const auto texts = fixtures::synthetic_texts(900, 3, 5, 20);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back(make_document(texts[i], "d"));
  std::mt19937_64 gen(4);
  for (int i = 0; i < 100; ++i) docs.push_back(docs[gen() % 900]);
  std::shuffle(docs.begin(), docs.end(), gen);
  EXPECT_EQ(exact_dedup(docs).size(), 900u);
}

TEST(LengthFilter, Bounds) {
  std::vector<Document> docs = {make_document(words(10), "a"), make_document(words(80), "b"),
                                make_document(words(5000), "c")};
  auto out = length_filter(docs, 50, 1024);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].word_count, 80u);
  EXPECT_EQ(length_filter(docs, 1, 10000).size(), 3u);
  EXPECT_TRUE(length_filter({}, 1, 2).empty());
  EXPECT_THROW(length_filter(docs, 5, 5), PreconditionError);
}

TEST(LengthFilterProperty, WideningNeverRemoves) {
  std::mt19937_64 gen(8);
  std::vector<Document> docs;
  for (int i = 0; i < 200; ++i) docs.push_back(make_document(words(1 + gen() % 400), "x"));
  for (int t = 0; t < 100; ++t) {
    const std::size_t lo = 1 + gen() % 100, hi = lo + 1 + gen() % 200;
    const auto narrow = length_filter(docs, lo, hi);
    const std::size_t wide_lo = lo - std::min(lo - 1, static_cast<std::size_t>(gen() % 50));
    const auto wide = length_filter(docs, wide_lo, hi + gen() % 50);
    for (const auto& d : narrow) {
      EXPECT_NE(std::find(wide.begin(), wide.end(), d), wide.end());
    }
  }
}

TEST(DocumentJson, RoundTrip) {
  auto d = make_document("Some text here", "src#1");
  auto back = document_from_json(to_json(d));
  EXPECT_EQ(back, d);
  EXPECT_EQ(to_json(d).dump(),
            "{\"doc_id\":\"" + d.doc_id +
                "\",\"text\":\"Some text here\",\"word_count\":3,\"source_id\":\"src#1\"}");
}
