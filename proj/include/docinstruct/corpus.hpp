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

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "docinstruct/jsonl.hpp"

namespace docinstruct {

struct RawSource {
  std::string source_id;
  std::string text;
  std::string origin;
};

struct Document {
  std::string doc_id;  // content_id(text)
  std::string text;
  std::size_t word_count = 0;
  std::string source_id;
  bool kept = true;  // false when segmentation produced an undersized chunk

  bool operator==(const Document&) const = default;
};

Document make_document(std::string text, std::string source_id);

enum class SplitMode { kParagraph, kSlidingWindow };

struct SegmentationPolicy {
  std::size_t min_words = 64;
  std::size_t max_words = 1024;
  SplitMode split_on = SplitMode::kParagraph;
  std::size_t window_words = 256;

  // Throws PreconditionError unless 0 < min_words < max_words.
  void validate() const;
};

enum class SourceFormat { kJsonl, kPlainTextDir };

struct LoadResult {
  std::vector<RawSource> sources;
  std::vector<LineError> skipped;  // line is 0 for directory entries
};

// JSONL: one source per line, text from "content" (or "text"). Directory:
// one source per regular file, lexicographic by relative path.
LoadResult load_sources(const std::filesystem::path& path, SourceFormat format);

// Paragraph mode merges blank-line separated paragraphs until each chunk
// reaches min_words, hard-splitting paragraphs longer than max_words at word
// boundaries. Every chunk is a verbatim slice of the source text.
std::vector<Document> segment(const RawSource& source,
                              const SegmentationPolicy& policy);

// Keeps the first occurrence of each doc_id, preserving order.
std::vector<Document> exact_dedup(std::span<const Document> docs);

// Keeps docs with min_words <= word_count <= max_words, preserving order.
std::vector<Document> length_filter(std::span<const Document> docs,
                                    std::size_t min_words,
                                    std::size_t max_words);

Json to_json(const Document& doc);
Document document_from_json(const Json& j);

}  // namespace docinstruct
