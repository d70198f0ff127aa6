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

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pixelpoison/hashing.hpp"
#include "pixelpoison/image.hpp"

namespace pxp {

/// Images are 3-channel throughout.
inline constexpr Index kChannels = 3;

/// Single-vector bi-encoder scoring vs. multi-vector late interaction.
enum class Mode { kSingle, kMulti };

inline const char* mode_name(Mode m) {
  return m == Mode::kSingle ? "single" : "multi";
}

inline Mode mode_from_name(std::string_view name) {
  if (name == "single") return Mode::kSingle;
  if (name == "multi") return Mode::kMulti;
  throw std::invalid_argument("unknown scorer mode: " + std::string(name));
}

class DegenerateEmbeddingError : public std::runtime_error {
 public:
  explicit DegenerateEmbeddingError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Frozen random projection from flattened patches to the embedding space.
/// Entries are uniform in [-1, 1) scaled by 1/sqrt(input_dim), drawn from the
/// raw engine stream so the matrix is identical across platforms.
struct ScorerWeights {
  Index patch_side = 8;
  Index embed_dim = 64;
  Eigen::MatrixXd projection;  // embed_dim x (patch_side^2 * kChannels)
  std::uint64_t rng_seed = 0;

  Index input_dim() const { return patch_side * patch_side * kChannels; }

  static ScorerWeights seeded(Index patch_side, Index embed_dim,
                              std::uint64_t seed) {
    if (patch_side < 1 || embed_dim < 1)
      throw std::invalid_argument("ScorerWeights: dimensions must be positive");
    ScorerWeights w;
    w.patch_side = patch_side;
    w.embed_dim = embed_dim;
    w.rng_seed = seed;
    const Index m = w.input_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    std::mt19937_64 eng(seed);
    w.projection.resize(embed_dim, m);
    for (Index r = 0; r < embed_dim; ++r)
      for (Index c = 0; c < m; ++c)
        w.projection(r, c) = (2.0 * unit_real(eng) - 1.0) * scale;
    return w;
  }
};

/// Unit-norm query vectors, one column per token (exactly one in single mode).
struct QueryEmbedding {
  Mode mode = Mode::kSingle;
  Eigen::MatrixXd vectors;  // embed_dim x tokens
};

/// Unit-norm document vectors, one column per patch (one pooled column in
/// single mode).
struct DocEmbedding {
  Mode mode = Mode::kSingle;
  Eigen::MatrixXd vectors;  // embed_dim x patches
};

namespace detail {

/// Character n-grams of length 3 (the whole string when shorter), hashed with
/// FNV-1a into sign buckets.
inline void accumulate_trigrams(std::string_view s, Eigen::VectorXd& acc) {
  const Index d = acc.size();
  auto add = [&](std::string_view gram) {
    const std::uint64_t h = fnv1a64(gram);
    const Index bucket = static_cast<Index>(h % static_cast<std::uint64_t>(d));
    acc[bucket] += (h >> 63) ? -1.0 : 1.0;
  };
  if (s.size() >= 3) {
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) add(s.substr(i, 3));
  } else {
    add(s);
  }
}

inline std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j > i) tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace detail

/// Deterministic text encoder: character-trigram hashing in single mode, one
/// hashed vector per whitespace token in multi mode. Queries are never
/// optimised, so no gradient path exists here.
inline QueryEmbedding encode_query(std::string_view text, Mode mode,
                                   const ScorerWeights& weights) {
  if (text.empty())
    throw std::invalid_argument("encode_query: empty query text");
  const Index d = weights.embed_dim;
  QueryEmbedding q;
  q.mode = mode;
  if (mode == Mode::kSingle) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    detail::accumulate_trigrams(text, acc);
    const double n = acc.norm();
    if (n == 0.0)
      throw std::invalid_argument("encode_query: text \"" + std::string(text) +
                                  "\" hashes to the zero vector");
    q.vectors = acc / n;
  } else {
    const auto tokens = detail::whitespace_tokens(text);
    if (tokens.empty())
      throw std::invalid_argument("encode_query: no tokens in query text");
    q.vectors.resize(d, static_cast<Index>(tokens.size()));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      detail::accumulate_trigrams(tokens[t], acc);
      const double n = acc.norm();
      if (n == 0.0)
        throw std::invalid_argument("encode_query: token \"" +
                                    std::string(tokens[t]) +
                                    "\" hashes to the zero vector");
      q.vectors.col(static_cast<Index>(t)) = acc / n;
    }
  }
  return q;
}

namespace detail {

/// tanh(projection * patches) for every patch column.
inline Eigen::MatrixXd patch_activations(const Image& img,
                                         const ScorerWeights& weights) {
  if (img.c != kChannels)
    throw std::invalid_argument("encode_image: expected " +
                                std::to_string(kChannels) + " channels, got " +
                                std::to_string(img.c));
  const Eigen::MatrixXd patches = patchify(img, weights.patch_side);
  return (weights.projection * patches).array().tanh().matrix();
}

}  // namespace detail

inline DocEmbedding encode_image(const Image& img, Mode mode,
                                 const ScorerWeights& weights) {
  const Eigen::MatrixXd acts = detail::patch_activations(img, weights);
  DocEmbedding doc;
  doc.mode = mode;
  if (mode == Mode::kSingle) {
    Eigen::VectorXd pooled = acts.rowwise().mean();
    const double n = pooled.norm();
    if (n == 0.0)
      throw DegenerateEmbeddingError("encode_image: pooled embedding is zero");
    doc.vectors = pooled / n;
  } else {
    doc.vectors.resize(acts.rows(), acts.cols());
    for (Index k = 0; k < acts.cols(); ++k) {
      const double n = acts.col(k).norm();
      if (n == 0.0)
        throw DegenerateEmbeddingError("encode_image: patch " +
                                       std::to_string(k) +
                                       " embedding is zero");
      doc.vectors.col(k) = acts.col(k) / n;
    }
  }
  return doc;
}

/// Cosine similarity in single mode; MaxSim (sum over query tokens of the
/// best patch dot product) in multi mode.
inline double score_embeddings(const QueryEmbedding& q, const DocEmbedding& doc) {
  if (q.mode != doc.mode)
    throw std::invalid_argument("score: query/document mode mismatch");
  if (q.vectors.rows() != doc.vectors.rows())
    throw std::invalid_argument("score: embedding dimension mismatch");
  if (q.mode == Mode::kSingle)
    return q.vectors.col(0).dot(doc.vectors.col(0));
  const Eigen::MatrixXd dots = doc.vectors.transpose() * q.vectors;
  return dots.colwise().maxCoeff().sum();
}

inline double score(const Image& img, const QueryEmbedding& q,
                    const ScorerWeights& weights) {
  return score_embeddings(q, encode_image(img, q.mode, weights));
}

namespace detail {

inline void require_query_set(const std::vector<QueryEmbedding>& queries,
                              const ScorerWeights& weights) {
  if (queries.empty())
    throw std::invalid_argument("loss: empty query set");
  const Mode mode = queries.front().mode;
  for (const QueryEmbedding& q : queries) {
    if (q.mode != mode)
      throw std::invalid_argument("loss: mixed query modes in one set");
    if (q.vectors.rows() != weights.embed_dim)
      throw std::invalid_argument("loss: query dimension mismatch");
    if (q.vectors.cols() < 1)
      throw std::invalid_argument("loss: query with no vectors");
  }
}

}  // namespace detail

/// Attack objective: negative mean similarity over the target queries.
/// Lower is better for the attacker.
inline double loss(const Image& img, const std::vector<QueryEmbedding>& queries,
                   const ScorerWeights& weights) {
  detail::require_query_set(queries, weights);
  const DocEmbedding doc = encode_image(img, queries.front().mode, weights);
  double total = 0.0;
  for (const QueryEmbedding& q : queries) total += score_embeddings(q, doc);
  return -total / static_cast<double>(queries.size());
}

struct LossGrad {
  double value = 0.0;
  Gradient grad;
};

/// Exact analytic pixel gradient of the loss, together with its value. The
/// chain runs mean-over-queries -> cosine (single) or MaxSim with ties routed
/// to the lowest patch index (multi) -> L2 normalisation -> tanh ->
/// projection transpose -> patch scatter.
inline LossGrad loss_and_grad(const Image& img,
                              const std::vector<QueryEmbedding>& queries,
                              const ScorerWeights& weights) {
  detail::require_query_set(queries, weights);
  const Mode mode = queries.front().mode;
  const Eigen::MatrixXd acts = detail::patch_activations(img, weights);
  const Index d = acts.rows();
  const Index num_patches = acts.cols();
  const double inv_q = 1.0 / static_cast<double>(queries.size());

  double total_score = 0.0;
  Eigen::MatrixXd grad_acts(d, num_patches);

  if (mode == Mode::kSingle) {
    const Eigen::VectorXd pooled = acts.rowwise().mean();
    const double norm = pooled.norm();
    if (norm == 0.0)
      throw DegenerateEmbeddingError("loss: pooled embedding is zero");
    const Eigen::VectorXd unit = pooled / norm;
    Eigen::VectorXd grad_pooled = Eigen::VectorXd::Zero(d);
    for (const QueryEmbedding& q : queries) {
      const double s = q.vectors.col(0).dot(unit);
      total_score += s;
      // d(q . pooled/|pooled|)/d(pooled) = (q - s * unit) / |pooled|
      grad_pooled += (q.vectors.col(0) - s * unit) / norm;
    }
    grad_pooled *= -inv_q;
    // Each patch column contributes 1/num_patches to the pooled mean.
    grad_acts = (grad_pooled / static_cast<double>(num_patches))
                    .replicate(1, num_patches);
  } else {
    Eigen::VectorXd col_norms(num_patches);
    Eigen::MatrixXd unit(d, num_patches);
    for (Index k = 0; k < num_patches; ++k) {
      col_norms[k] = acts.col(k).norm();
      if (col_norms[k] == 0.0)
        throw DegenerateEmbeddingError("loss: patch embedding is zero");
      unit.col(k) = acts.col(k) / col_norms[k];
    }
    Eigen::MatrixXd grad_unit = Eigen::MatrixXd::Zero(d, num_patches);
    for (const QueryEmbedding& q : queries) {
      const Eigen::MatrixXd dots = unit.transpose() * q.vectors;
      for (Index t = 0; t < q.vectors.cols(); ++t) {
        Index best = 0;
        for (Index k = 1; k < num_patches; ++k)
          if (dots(k, t) > dots(best, t)) best = k;
        total_score += dots(best, t);
        grad_unit.col(best) += q.vectors.col(t);
      }
    }
    grad_unit *= -inv_q;
    for (Index k = 0; k < num_patches; ++k) {
      const Eigen::VectorXd g = grad_unit.col(k);
      grad_acts.col(k) = (g - g.dot(unit.col(k)) * unit.col(k)) / col_norms[k];
    }
  }

  const Eigen::MatrixXd grad_pre =
      (grad_acts.array() * (1.0 - acts.array().square())).matrix();
  const Eigen::MatrixXd grad_patches = weights.projection.transpose() * grad_pre;

  LossGrad out;
  out.value = -total_score * inv_q;
  out.grad = unpatchify(grad_patches, img.h, img.w, img.c, weights.patch_side);
  return out;
}

inline Gradient grad_loss(const Image& img,
                          const std::vector<QueryEmbedding>& queries,
                          const ScorerWeights& weights) {
  return loss_and_grad(img, queries, weights).grad;
}

}  // namespace pxp
