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

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pixelpoison/image.hpp"
#include "pixelpoison/scorer.hpp"

namespace pxp {

struct CorpusDoc {
  std::string id;
  Image image;
  bool injected = false;
};

/// Screenshot collection under attack. Keeps insertion order; ids unique.
/// Document embeddings are cached per (mode, weights) so repeated ranking
/// passes only pay for encoding once; the cache follows add/remove
/// incrementally and is rebuilt when the scorer changes. Not safe for
/// concurrent mutation; concurrent ranking is fine once the cache is warm.
class Corpus {
 public:
  Index size() const { return static_cast<Index>(docs_.size()); }
  bool empty() const { return docs_.empty(); }
  const std::vector<CorpusDoc>& docs() const { return docs_; }

  bool contains(const std::string& id) const {
    return by_id_.find(id) != by_id_.end();
  }

  const CorpusDoc& doc(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw std::invalid_argument("Corpus: unknown document id \"" + id + "\"");
    return docs_[it->second];
  }

  std::vector<std::string> injected_ids() const {
    std::vector<std::string> ids;
    for (const CorpusDoc& d : docs_)
      if (d.injected) ids.push_back(d.id);
    return ids;
  }

  void add(std::string id, Image image, bool injected = false) {
    if (contains(id))
      throw std::invalid_argument("Corpus: duplicate document id \"" + id +
                                  "\"");
    if (cache_.valid)
      cache_.embeddings.push_back(
          encode_image(image, cache_.mode, cache_.weights));
    by_id_.emplace(id, docs_.size());
    docs_.push_back(CorpusDoc{std::move(id), std::move(image), injected});
  }

  void remove(const std::string& id) {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw std::invalid_argument("Corpus: unknown document id \"" + id + "\"");
    const std::size_t pos = it->second;
    docs_.erase(docs_.begin() + static_cast<std::ptrdiff_t>(pos));
    if (cache_.valid)
      cache_.embeddings.erase(cache_.embeddings.begin() +
                              static_cast<std::ptrdiff_t>(pos));
    by_id_.erase(it);
    for (auto& [key, index] : by_id_)
      if (index > pos) --index;
  }

  /// The cached embedding of document i for this (mode, weights) pair,
  /// encoding the whole corpus on the first call.
  const DocEmbedding& embedding(Index i, Mode mode,
                                const ScorerWeights& weights) const {
    if (!cache_.valid || cache_.mode != mode ||
        cache_.weights_seed != weights.rng_seed ||
        cache_.patch_side != weights.patch_side ||
        cache_.embed_dim != weights.embed_dim) {
      cache_.embeddings.clear();
      cache_.embeddings.reserve(docs_.size());
      for (const CorpusDoc& d : docs_)
        cache_.embeddings.push_back(encode_image(d.image, mode, weights));
      cache_.mode = mode;
      cache_.weights_seed = weights.rng_seed;
      cache_.patch_side = weights.patch_side;
      cache_.embed_dim = weights.embed_dim;
      cache_.weights = weights;  // owned copy: incremental adds encode with it
      cache_.valid = true;
    }
    return cache_.embeddings[static_cast<std::size_t>(i)];
  }

 private:
  std::vector<CorpusDoc> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;

  struct Cache {
    bool valid = false;
    Mode mode = Mode::kSingle;
    std::uint64_t weights_seed = 0;
    Index patch_side = 0;
    Index embed_dim = 0;
    ScorerWeights weights;
    std::vector<DocEmbedding> embeddings;
  };
  mutable Cache cache_;
};

/// Adds an adversarial screenshot, returning the grown corpus.
inline Corpus inject(Corpus corpus, Image img, std::string id) {
  corpus.add(std::move(id), std::move(img), /*injected=*/true);
  return corpus;
}

struct ScoredDoc {
  std::string id;
  double score = 0.0;
};

/// Retrieval result for one query: entries in descending score order, ties
/// broken by ascending document id.
struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> entries;
};

namespace detail {

inline void sort_scored(std::vector<ScoredDoc>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ScoredDoc& a, const ScoredDoc& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });
}

}  // namespace detail

/// Exhaustively scores the corpus and keeps the top k (all of it when k
/// exceeds the corpus size).
inline RankedList rank(const QueryEmbedding& query, const Corpus& corpus,
                       const ScorerWeights& weights, Index k,
                       std::string query_id = "q") {
  if (k < 1) throw std::invalid_argument("rank: depth must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("rank: empty corpus");
  RankedList out;
  out.query_id = std::move(query_id);
  out.entries.reserve(static_cast<std::size_t>(corpus.size()));
  for (Index i = 0; i < corpus.size(); ++i)
    out.entries.push_back(
        {corpus.docs()[static_cast<std::size_t>(i)].id,
         score_embeddings(query, corpus.embedding(i, query.mode, weights))});
  detail::sort_scored(out.entries);
  if (static_cast<Index>(out.entries.size()) > k)
    out.entries.resize(static_cast<std::size_t>(k));
  return out;
}

/// Reciprocal rank fusion: fused(d) = sum over rankings containing d of
/// 1 / (kconst + rank of d). Returns every document seen, descending fused
/// score, ties by ascending id.
inline std::vector<ScoredDoc> rrf_fuse(const std::vector<RankedList>& rankings,
                                       double kconst = 60.0) {
  if (rankings.empty())
    throw std::invalid_argument("rrf_fuse: no rankings to fuse");
  if (!(kconst > 0.0))
    throw std::invalid_argument("rrf_fuse: constant must be positive");
  std::map<std::string, double> fused;  // ordered: deterministic iteration
  for (const RankedList& list : rankings)
    for (std::size_t r = 0; r < list.entries.size(); ++r)
      fused[list.entries[r].id] += 1.0 / (kconst + static_cast<double>(r + 1));
  std::vector<ScoredDoc> out;
  out.reserve(fused.size());
  for (const auto& [id, score] : fused) out.push_back({id, score});
  detail::sort_scored(out);
  return out;
}

/// Seed-document selection: rank the whole corpus for every query, fuse
/// with RRF, and return the n least-relevant documents (lowest fused score
/// first, ties by ascending id).
inline std::vector<std::string> select_seed_documents(
    const Corpus& corpus, const std::vector<QueryEmbedding>& queries, Index n,
    const ScorerWeights& weights) {
  if (n < 0 || n > corpus.size())
    throw std::invalid_argument(
        "select_seed_documents: count exceeds corpus size");
  if (queries.empty())
    throw std::invalid_argument("select_seed_documents: no queries");
  std::vector<RankedList> rankings;
  rankings.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i)
    rankings.push_back(rank(queries[i], corpus, weights, corpus.size(),
                            "seed-q" + std::to_string(i)));
  std::vector<ScoredDoc> fused = rrf_fuse(rankings);
  std::sort(fused.begin(), fused.end(),
            [](const ScoredDoc& a, const ScoredDoc& b) {
              if (a.score != b.score) return a.score < b.score;
              return a.id < b.id;
            });
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out.push_back(fused[static_cast<std::size_t>(i)].id);
  return out;
}

/// TREC-style run lines: "qid Q0 docid rank score tag".
inline std::string format_trec_run(const RankedList& list,
                                   const std::string& tag = "pixelpoison") {
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < list.entries.size(); ++r) {
    std::snprintf(buf, sizeof(buf), " %zu %.17g ", r + 1,
                  list.entries[r].score);
    out += list.query_id;
    out += " Q0 ";
    out += list.entries[r].id;
    out += buf;
    out += tag;
    out += '\n';
  }
  return out;
}

}  // namespace pxp
