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

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "pixelpoison/hashing.hpp"
#include "pixelpoison/scorer.hpp"

namespace pxp {

/// Result of clustering n points into m groups.
struct Clustering {
  Index m = 0;
  Eigen::MatrixXd centroids;          // d x m
  std::vector<Index> assignment;      // point index -> cluster index
  double inertia = 0.0;               // total squared distance at convergence
  std::vector<double> inertia_trace;  // one entry per assignment pass
};

namespace detail {

/// Nearest centroid with ties toward the lowest cluster index.
inline Index nearest_centroid(const Eigen::MatrixXd& centroids,
                              const Eigen::VectorXd& p, double* d2_out) {
  Index best = 0;
  double best_d2 = (centroids.col(0) - p).squaredNorm();
  for (Index c = 1; c < centroids.cols(); ++c) {
    const double d2 = (centroids.col(c) - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  if (d2_out) *d2_out = best_d2;
  return best;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed:
/// all randomness comes from explicit mappings of the raw engine stream.
/// Empty clusters are re-seeded with the point farthest from its centroid.
inline Clustering kmeans(const Eigen::MatrixXd& points, Index m,
                         Index max_iters, std::uint64_t seed) {
  const Index n = points.cols();
  const Index d = points.rows();
  if (m < 1 || m > n)
    throw std::invalid_argument("kmeans: cluster count must be in [1, n]");
  if (max_iters < 1)
    throw std::invalid_argument("kmeans: need at least one iteration");

  std::mt19937_64 eng(seed);
  Clustering out;
  out.m = m;
  out.centroids.resize(d, m);

  // k-means++ seeding: first centroid uniform, the rest proportional to the
  // squared distance from the nearest centroid chosen so far.
  out.centroids.col(0) =
      points.col(static_cast<Index>(unit_index(eng, static_cast<std::size_t>(n))));
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, 0.0);
  for (Index i = 0; i < n; ++i)
    d2[i] = (points.col(i) - out.centroids.col(0)).squaredNorm();
  for (Index c = 1; c < m; ++c) {
    const double total = d2.sum();
    Index pick;
    if (total > 0.0) {
      const double target = unit_real(eng) * total;
      double cum = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > target) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining points coincide with chosen centroids.
      pick = static_cast<Index>(unit_index(eng, static_cast<std::size_t>(n)));
    }
    out.centroids.col(c) = points.col(pick);
    for (Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.col(i) - out.centroids.col(c)).squaredNorm());
  }

  out.assignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<Index> counts(static_cast<std::size_t>(m), 0);
  for (Index iter = 0; iter < max_iters; ++iter) {
    // Assignment pass; inertia is recorded against the centroids used to
    // assign, which is what makes the trace provably non-increasing.
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      double dist2 = 0.0;
      const Index c = detail::nearest_centroid(out.centroids, points.col(i), &dist2);
      inertia += dist2;
      if (c != out.assignment[static_cast<std::size_t>(i)]) {
        out.assignment[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    out.inertia_trace.push_back(inertia);
    out.inertia = inertia;
    if (!changed && iter > 0) break;

    // Update pass: centroids move to their members' mean.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, m);
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      sums.col(out.assignment[static_cast<std::size_t>(i)]) += points.col(i);
      ++counts[static_cast<std::size_t>(out.assignment[static_cast<std::size_t>(i)])];
    }
    // Re-seed empty clusters with the globally farthest point.
    std::vector<bool> stolen(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < m; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        out.centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      Index far = -1;
      double far_d2 = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (stolen[static_cast<std::size_t>(i)]) continue;
        const double dist2 =
            (points.col(i) -
             out.centroids.col(out.assignment[static_cast<std::size_t>(i)]))
                .squaredNorm();
        if (dist2 > far_d2) {
          far_d2 = dist2;
          far = i;
        }
      }
      out.centroids.col(c) = points.col(far);
      stolen[static_cast<std::size_t>(far)] = true;
    }
  }
  return out;
}

/// Partition {0..n-1} by cluster index.
inline std::vector<std::vector<Index>> split_indices(const Clustering& clustering) {
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(clustering.m));
  for (std::size_t i = 0; i < clustering.assignment.size(); ++i)
    groups[static_cast<std::size_t>(clustering.assignment[i])].push_back(
        static_cast<Index>(i));
  return groups;
}

/// Partition arbitrary items by the clustering of their indices.
template <class T>
std::vector<std::vector<T>> split_queries(const std::vector<T>& items,
                                          const Clustering& clustering) {
  if (items.size() != clustering.assignment.size())
    throw std::invalid_argument(
        "split_queries: clustering does not cover the items");
  std::vector<std::vector<T>> groups(static_cast<std::size_t>(clustering.m));
  for (std::size_t i = 0; i < items.size(); ++i)
    groups[static_cast<std::size_t>(clustering.assignment[i])].push_back(items[i]);
  return groups;
}

/// One column per query: the single-mode vector itself, or the mean over
/// token vectors for multi-mode queries.
inline Eigen::MatrixXd pooled_query_matrix(
    const std::vector<QueryEmbedding>& queries) {
  if (queries.empty())
    throw std::invalid_argument("pooled_query_matrix: no queries");
  const Index d = queries.front().vectors.rows();
  Eigen::MatrixXd points(d, static_cast<Index>(queries.size()));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].vectors.rows() != d)
      throw std::invalid_argument("pooled_query_matrix: dimension mismatch");
    points.col(static_cast<Index>(i)) = queries[i].vectors.rowwise().mean();
  }
  return points;
}

}  // namespace pxp
