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

#include "docinstruct/corpus.hpp"

#include <algorithm>
#include <unordered_set>

#include "docinstruct/common.hpp"

namespace docinstruct {

namespace fs = std::filesystem;

Document make_document(std::string text, std::string source_id) {
  Document d;
  d.doc_id = content_id(text);
  d.word_count = word_count(text);
  d.text = std::move(text);
  d.source_id = std::move(source_id);
  return d;
}

void SegmentationPolicy::validate() const {
  if (min_words == 0 || min_words >= max_words) {
    throw PreconditionError("segmentation policy requires 0 < min_words < max_words");
  }
  if (split_on == SplitMode::kSlidingWindow && window_words == 0) {
    throw PreconditionError("sliding_window requires window_words > 0");
  }
}

namespace {

std::string stem_of(const fs::path& p) { return p.filename().string(); }

LoadResult load_jsonl(const fs::path& path) {
  LoadResult result;
  std::vector<LineError> errors;
  auto lines = read_jsonl(path, errors);
  result.skipped = std::move(errors);
  const std::string stem = stem_of(path);
  for (auto& [line_no, obj] : lines) {
    if (!obj.is_object()) {
      result.skipped.push_back({line_no, "line is not a JSON object"});
      continue;
    }
    const Json* field = nullptr;
    if (auto it = obj.find("content"); it != obj.end()) {
      field = &*it;
    } else if (auto it2 = obj.find("text"); it2 != obj.end()) {
      field = &*it2;
    }
    if (field == nullptr || !field->is_string()) {
      result.skipped.push_back({line_no, "missing string field \"content\" or \"text\""});
      continue;
    }
    std::string text = field->get<std::string>();
    if (trim(text).empty()) {
      result.skipped.push_back({line_no, "empty content"});
      continue;
    }
    RawSource src;
    src.source_id = stem + "#" + std::to_string(line_no);
    if (auto it = obj.find("source"); it != obj.end() && it->is_string()) {
      src.origin = it->get<std::string>();
    } else if (auto u = obj.find("url"); u != obj.end() && u->is_string()) {
      src.origin = u->get<std::string>();
    } else {
      src.origin = path.string();
    }
    src.text = std::move(text);
    result.sources.push_back(std::move(src));
  }
  return result;
}

LoadResult load_dir(const fs::path& root) {
  LoadResult result;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return fs::relative(a, root).generic_string() <
           fs::relative(b, root).generic_string();
  });
  for (const auto& f : files) {
    std::string rel = fs::relative(f, root).generic_string();
    std::string text = read_file(f);
    if (trim(text).empty()) {
      result.skipped.push_back({0, rel + ": empty file"});
      continue;
    }
    result.sources.push_back({rel, std::move(text), f.string()});
  }
  return result;
}

struct WordSpan {
  std::size_t begin;
  std::size_t end;
};

// Word byte spans plus the indices of words that start a new paragraph.
void scan_words(std::string_view text, std::vector<WordSpan>& words,
                std::vector<std::size_t>& paragraph_starts) {
  std::size_t i = 0;
  std::size_t newlines = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      if (text[i] == '\n') ++newlines;
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (words.empty() || newlines >= 2) paragraph_starts.push_back(words.size());
    words.push_back({start, i});
    newlines = 0;
  }
}

}  // namespace

LoadResult load_sources(const fs::path& path, SourceFormat format) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError("no such path: " + path.string());
  switch (format) {
    case SourceFormat::kJsonl:
      if (fs::is_directory(path)) {
        throw IoError(path.string() + " is a directory, expected a JSONL file");
      }
      return load_jsonl(path);
    case SourceFormat::kPlainTextDir:
      if (!fs::is_directory(path)) {
        throw IoError(path.string() + " is not a directory");
      }
      return load_dir(path);
  }
  return {};
}

std::vector<Document> segment(const RawSource& source,
                              const SegmentationPolicy& policy) {
  policy.validate();
  std::vector<WordSpan> words;
  std::vector<std::size_t> para_starts;
  scan_words(source.text, words, para_starts);
  if (words.empty()) return {};

  // Pieces are [first, last) word ranges, none longer than the cap.
  std::vector<std::pair<std::size_t, std::size_t>> pieces;
  if (policy.split_on == SplitMode::kSlidingWindow) {
    const std::size_t w = std::min(policy.window_words, policy.max_words);
    for (std::size_t b = 0; b < words.size(); b += w) {
      pieces.emplace_back(b, std::min(words.size(), b + w));
    }
  } else {
    para_starts.push_back(words.size());
    for (std::size_t p = 0; p + 1 < para_starts.size(); ++p) {
      for (std::size_t b = para_starts[p]; b < para_starts[p + 1];
           b += policy.max_words) {
        pieces.emplace_back(b, std::min(para_starts[p + 1], b + policy.max_words));
      }
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  if (policy.split_on == SplitMode::kSlidingWindow) {
    chunks = pieces;
  } else {
    bool open = false;
    std::pair<std::size_t, std::size_t> cur{0, 0};
    for (const auto& piece : pieces) {
      if (!open) {
        cur = piece;
        open = true;
        continue;
      }
      const std::size_t cur_len = cur.second - cur.first;
      const std::size_t piece_len = piece.second - piece.first;
      if (cur_len < policy.min_words && cur_len + piece_len <= policy.max_words) {
        cur.second = piece.second;
      } else {
        chunks.push_back(cur);
        cur = piece;
      }
    }
    if (open) chunks.push_back(cur);
  }

  std::vector<Document> docs;
  docs.reserve(chunks.size());
  for (const auto& [first, last] : chunks) {
    const std::size_t b = words[first].begin;
    const std::size_t e = words[last - 1].end;
    Document d = make_document(source.text.substr(b, e - b), source.source_id);
    d.kept = d.word_count >= policy.min_words;
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> exact_dedup(std::span<const Document> docs) {
  std::vector<Document> out;
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    if (seen.insert(d.doc_id).second) out.push_back(d);
  }
  return out;
}

std::vector<Document> length_filter(std::span<const Document> docs,
                                    std::size_t min_words,
                                    std::size_t max_words) {
  if (min_words == 0 || min_words >= max_words) {
    throw PreconditionError("length_filter requires 0 < min_words < max_words");
  }
  std::vector<Document> out;
  for (const auto& d : docs) {
    if (d.word_count >= min_words && d.word_count <= max_words) out.push_back(d);
  }
  return out;
}

Json to_json(const Document& doc) {
  Json j;
  j["doc_id"] = doc.doc_id;
  j["text"] = doc.text;
  j["word_count"] = doc.word_count;
  j["source_id"] = doc.source_id;
  return j;
}

Document document_from_json(const Json& j) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.text = j.at("text").get<std::string>();
  d.word_count = j.at("word_count").get<std::size_t>();
  d.source_id = j.value("source_id", std::string{});
  return d;
}

}  // namespace docinstruct
