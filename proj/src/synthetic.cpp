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
#include "pixelpoison/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string_view>
#include <unordered_set>
#include <utility>

#include "pixelpoison/hashing.hpp"

namespace pxp {

namespace {

constexpr std::string_view kConsonants = "bcdfghjklmnprstvwz";
constexpr std::string_view kVowels = "aeiou";

std::string pseudo_word(std::mt19937_64& eng) {
  std::string word;
  const std::size_t syllables = 2 + unit_index(eng, 2);  // 2 or 3
  for (std::size_t s = 0; s < syllables; ++s) {
    word += kConsonants[unit_index(eng, kConsonants.size())];
    word += kVowels[unit_index(eng, kVowels.size())];
  }
  return word;
}

std::string fresh_word(std::mt19937_64& eng,
                       std::unordered_set<std::string>& used) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::string word = pseudo_word(eng);
    if (used.insert(word).second) return word;
  }
  throw std::runtime_error("make_vocabulary: pseudo-word space exhausted");
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

/// Dropout + shuffle of the base words under the label-derived stream. Always
/// keeps at least one word.
std::string perturb_words(const std::vector<std::string>& base,
                          std::uint64_t seed, const std::string& label) {
  std::mt19937_64 eng(derive_seed(seed, label));
  std::vector<std::string> kept;
  for (const std::string& w : base)
    if (unit_real(eng) >= 0.25) kept.push_back(w);
  if (kept.empty()) kept.push_back(base.front());
  for (std::size_t i = kept.size(); i > 1; --i)
    std::swap(kept[i - 1], kept[unit_index(eng, i)]);
  return join_words(kept);
}

/// Perturbation with a duplicate-avoidance re-roll: bump the label until the
/// result is unseen.
std::string distinct_perturbation(const std::vector<std::string>& base,
                                  std::uint64_t seed, const std::string& label,
                                  std::unordered_set<std::string>& used) {
  for (int r = 0; r < 100; ++r) {
    std::string attempt_label = label;
    if (r) attempt_label += "-r" + std::to_string(r);
    std::string text = perturb_words(base, seed, attempt_label);
    if (used.insert(text).second) return text;
  }
  throw std::runtime_error("query generation: could not find a distinct "
                           "perturbation for " + label);
}

std::vector<std::string> query_base_words(const DocText& doc,
                                          Index query_len) {
  std::vector<std::string> words = split_words(doc.text);
  if (static_cast<Index>(words.size()) > query_len)
    words.resize(static_cast<std::size_t>(query_len));
  return words;
}

Index distinct_topics(const SyntheticCorpus& synth) {
  Index topics = 0;
  for (const DocText& t : synth.texts) topics = std::max(topics, t.topic + 1);
  return topics;
}

}  // namespace

void CorpusSpec::validate() const {
  if (size < 2) throw std::invalid_argument("CorpusSpec: size must be >= 2");
  if (glyph_side < 1)
    throw std::invalid_argument("CorpusSpec: glyph side must be >= 1");
  if (height < glyph_side || width < glyph_side || height % glyph_side != 0 ||
      width % glyph_side != 0)
    throw std::invalid_argument(
        "CorpusSpec: image dims must be positive multiples of the glyph side");
  if (topic_count < 1)
    throw std::invalid_argument("CorpusSpec: need at least one topic");
  if (topic_words < 1 || filler_words < 1)
    throw std::invalid_argument("CorpusSpec: word pools must be non-empty");
  if (!(topic_fraction >= 0.0 && topic_fraction <= 1.0))
    throw std::invalid_argument("CorpusSpec: topic fraction must be in [0,1]");
}

Vocabulary make_vocabulary(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 eng(derive_seed(spec.seed, "vocabulary"));
  std::unordered_set<std::string> used;
  Vocabulary vocab;
  vocab.filler.reserve(static_cast<std::size_t>(spec.filler_words));
  for (Index i = 0; i < spec.filler_words; ++i)
    vocab.filler.push_back(fresh_word(eng, used));
  vocab.topics.resize(static_cast<std::size_t>(spec.topic_count));
  for (auto& topic : vocab.topics) {
    topic.reserve(static_cast<std::size_t>(spec.topic_words));
    for (Index i = 0; i < spec.topic_words; ++i)
      topic.push_back(fresh_word(eng, used));
  }
  return vocab;
}

Image render_text_image(const std::string& text, Index height, Index width,
                        Index glyph_side) {
  if (glyph_side < 1 || height < glyph_side || width < glyph_side ||
      height % glyph_side != 0 || width % glyph_side != 0)
    throw std::invalid_argument(
        "render_text_image: dims must be positive multiples of the glyph "
        "side");
  Image img = Image::constant(height, width, kChannels, 1.0);  // paper white
  const std::vector<std::string> words = split_words(text);
  const Index grid_w = width / glyph_side;
  const Index cells = (height / glyph_side) * grid_w;
  const Index filled = std::min<Index>(cells, static_cast<Index>(words.size()));
  for (Index cell = 0; cell < filled; ++cell) {
    // Seeding from the word hash makes equal words render identically in any
    // cell, so shared vocabulary shows up as shared patch content.
    std::mt19937_64 eng(fnv1a64(words[static_cast<std::size_t>(cell)]));
    double ink[kChannels];
    for (double& v : ink) v = 0.35 * unit_real(eng);
    const Index cy = (cell / grid_w) * glyph_side;
    const Index cx = (cell % grid_w) * glyph_side;
    for (Index dy = 0; dy < glyph_side; ++dy)
      for (Index dx = 0; dx < glyph_side; ++dx) {
        const bool inked = unit_real(eng) < 0.45;
        if (!inked) continue;
        for (Index ch = 0; ch < kChannels; ++ch)
          img.at(cy + dy, cx + dx, ch) = ink[ch];
      }
  }
  return img;
}

SyntheticCorpus gen_corpus(const CorpusSpec& spec) {
  spec.validate();
  const Vocabulary vocab = make_vocabulary(spec);
  const Index cells =
      (spec.height / spec.glyph_side) * (spec.width / spec.glyph_side);
  SyntheticCorpus synth;
  synth.texts.reserve(static_cast<std::size_t>(spec.size));
  for (Index i = 0; i < spec.size; ++i) {
    DocText doc;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "doc%05lld", static_cast<long long>(i));
    doc.id = buf;
    doc.topic = i % spec.topic_count;
    std::mt19937_64 eng(derive_seed(spec.seed, "doc-" + std::to_string(i)));
    const auto& topic_pool = vocab.topics[static_cast<std::size_t>(doc.topic)];
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(cells));
    for (Index c = 0; c < cells; ++c) {
      const bool topical = unit_real(eng) < spec.topic_fraction;
      const auto& pool = topical ? topic_pool : vocab.filler;
      words.push_back(pool[unit_index(eng, pool.size())]);
    }
    doc.text = join_words(words);
    synth.corpus.add(doc.id, render_text_image(doc.text, spec.height,
                                               spec.width, spec.glyph_side));
    synth.texts.push_back(std::move(doc));
  }
  return synth;
}

std::vector<QueryGroup> gen_query_groups(const SyntheticCorpus& synth,
                                         Index groups, Index per_group,
                                         std::uint64_t seed, Index query_len) {
  if (groups < 1 || per_group < 1)
    throw std::invalid_argument(
        "gen_query_groups: need at least one group and one query per group");
  if (query_len < 1)
    throw std::invalid_argument("gen_query_groups: query length must be >= 1");
  const Index topics = distinct_topics(synth);
  if (groups > topics)
    throw std::invalid_argument(
        "gen_query_groups: group count exceeds distinct topics (" +
        std::to_string(topics) + ")");
  std::vector<QueryGroup> out;
  out.reserve(static_cast<std::size_t>(groups));
  for (Index g = 0; g < groups; ++g) {
    // Representative document: the first doc of topic g (topics are assigned
    // round-robin, so that is simply document g).
    const DocText& doc = synth.texts[static_cast<std::size_t>(g)];
    QueryGroup group;
    group.doc_id = doc.id;
    group.topic = doc.topic;
    const std::vector<std::string> base = query_base_words(doc, query_len);
    std::unordered_set<std::string> used;
    group.texts.push_back(join_words(base));  // the original
    used.insert(group.texts.back());
    for (Index q = 1; q < per_group; ++q)
      group.texts.push_back(distinct_perturbation(
          base, seed, "group-" + std::to_string(g) + "-" + std::to_string(q),
          used));
    out.push_back(std::move(group));
  }
  return out;
}

QuerySplit gen_query_split(const SyntheticCorpus& synth, Index train_count,
                           Index test_count, std::uint64_t seed,
                           Index query_len) {
  if (train_count < 1 || test_count < 1)
    throw std::invalid_argument(
        "gen_query_split: need at least one train and one test query");
  if (query_len < 1)
    throw std::invalid_argument("gen_query_split: query length must be >= 1");
  const Index topics = distinct_topics(synth);
  std::unordered_set<std::string> used;
  QuerySplit split;
  split.train.reserve(static_cast<std::size_t>(train_count));
  split.test.reserve(static_cast<std::size_t>(test_count));
  for (Index j = 0; j < train_count + test_count; ++j) {
    const DocText& doc = synth.texts[static_cast<std::size_t>(j % topics)];
    std::string text = distinct_perturbation(
        query_base_words(doc, query_len), seed, "split-" + std::to_string(j),
        used);
    if (j < train_count)
      split.train.push_back(std::move(text));
    else
      split.test.push_back(std::move(text));
  }
  return split;
}

}  // namespace pxp
