/*
 * Copyright 2026 The Pixelpoison Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pixelpoison/image.hpp"
#include "pixelpoison/retrieval.hpp"

namespace pxp {

/// Parameters for the synthetic screenshot generator. Documents are seeded
/// word salads — a per-document mix of topic words and shared filler words —
/// rasterized one word per glyph cell. The whole corpus is a pure function
/// of this spec.
struct CorpusSpec {
  Index size = 1000;
  Index height = 64;
  Index width = 64;
  Index glyph_side = 8;        // cell edge; dims must divide evenly
  Index topic_count = 20;
  Index topic_words = 8;       // exclusive vocabulary per topic
  Index filler_words = 64;     // vocabulary shared by every topic
  double topic_fraction = 0.6; // chance a slot draws a topic word
  std::uint64_t seed = 0;      // vocabulary + text randomness

  void validate() const;
};

/// Pseudo-word lists: one shared filler pool plus per-topic exclusive pools.
struct Vocabulary {
  std::vector<std::string> filler;
  std::vector<std::vector<std::string>> topics;
};

/// The text behind one rendered document.
struct DocText {
  std::string id;
  Index topic = 0;
  std::string text;
};

/// A generated corpus together with its source texts (kept so queries can
/// be derived from the documents they target).
struct SyntheticCorpus {
  Corpus corpus;
  std::vector<DocText> texts;
};

/// One target document and the paraphrase-style queries aimed at it.
/// texts[0] is the unperturbed original query.
struct QueryGroup {
  std::string doc_id;
  Index topic = 0;
  std::vector<std::string> texts;
};

/// Disjoint train/test query texts for the in-domain protocol.
struct QuerySplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Deterministic pseudo-word vocabulary for the given seed. Different seeds
/// give unrelated word sets, which is how the out-of-domain corpus gets a
/// disjoint vocabulary.
Vocabulary make_vocabulary(const CorpusSpec& spec);

/// Renders text as a grid of glyph cells, one word per cell in row-major
/// order (leftover cells stay paper-white, leftover words are dropped).
/// Each word's glyph is a hash-derived ink-on-white bit pattern, so equal
/// words render as identical pixel blocks wherever they land.
Image render_text_image(const std::string& text, Index height, Index width,
                        Index glyph_side);

/// The full synthetic corpus for a spec: texts and rendered screenshots.
SyntheticCorpus gen_corpus(const CorpusSpec& spec);

/// Query groups for the targeted protocol: picks `groups` distinct-topic
/// documents and emits `per_group` queries each — the original text's
/// leading words, then deterministic dropout/shuffle perturbations.
std::vector<QueryGroup> gen_query_groups(const SyntheticCorpus& synth,
                                         Index groups, Index per_group,
                                         std::uint64_t seed,
                                         Index query_len = 16);

/// Disjoint train/test query pools spread round-robin over topics. Queries
/// are perturbations like gen_query_groups'; duplicates are re-rolled so
/// train and test never share a text.
QuerySplit gen_query_split(const SyntheticCorpus& synth, Index train_count,
                           Index test_count, std::uint64_t seed,
                           Index query_len = 16);

}  // namespace pxp
