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
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "finite_difference.hpp"
#include "pixelpoison/hashing.hpp"
#include "pixelpoison/image.hpp"
#include "pixelpoison/io.hpp"
#include "pixelpoison/scorer.hpp"

namespace {

using pxp::Index;

pxp::Image random_image(Index h, Index w, std::uint64_t seed) {
  pxp::Image img(h, w, 3);
  std::mt19937_64 eng(seed);
  for (Index i = 0; i < img.size(); ++i) img.data[i] = pxp::unit_real(eng);
  return img;
}

/// Random unit vectors as a hand-built query embedding.
pxp::QueryEmbedding random_query(Index d, pxp::Mode mode, Index tokens,
                                 std::mt19937_64& eng) {
  pxp::QueryEmbedding q;
  q.mode = mode;
  q.vectors.resize(d, tokens);
  for (Index t = 0; t < tokens; ++t) {
    Eigen::VectorXd v(d);
    for (Index r = 0; r < d; ++r) v[r] = 2.0 * pxp::unit_real(eng) - 1.0;
    q.vectors.col(t) = v.normalized();
  }
  return q;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("hash primitives match their published reference vectors") {
  CHECK(pxp::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(pxp::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(pxp::fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(pxp::splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("seeded weights are deterministic and scaled") {
  const auto a = pxp::ScorerWeights::seeded(8, 64, 7);
  const auto b = pxp::ScorerWeights::seeded(8, 64, 7);
  const auto c = pxp::ScorerWeights::seeded(8, 64, 8);
  CHECK(a.projection == b.projection);
  CHECK(a.projection != c.projection);
  CHECK(a.projection.rows() == 64);
  CHECK(a.projection.cols() == 8 * 8 * 3);
  const double bound = 1.0 / std::sqrt(192.0);
  CHECK(a.projection.cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("weights container round-trips bit-exactly") {
  const auto w = pxp::ScorerWeights::seeded(4, 16, 12345);
  TempFile f("scorer_weights_roundtrip.scw");
  pxp::save_weights(w, f.path);
  const auto back = pxp::load_weights(f.path);
  CHECK(back.patch_side == 4);
  CHECK(back.embed_dim == 16);
  CHECK(back.rng_seed == 12345);
  CHECK(back.projection == w.projection);
}

TEST_CASE("query encoding is deterministic and unit-norm") {
  const auto w = pxp::ScorerWeights::seeded(8, 64, 1);
  const auto a = pxp::encode_query("adversarial screenshots", pxp::Mode::kSingle, w);
  const auto b = pxp::encode_query("adversarial screenshots", pxp::Mode::kSingle, w);
  CHECK(a.vectors == b.vectors);
  CHECK(a.vectors.cols() == 1);
  CHECK(std::abs(a.vectors.col(0).norm() - 1.0) < 1e-12);

  const auto m = pxp::encode_query("the cat", pxp::Mode::kMulti, w);
  CHECK(m.vectors.cols() == 2);
  for (Index t = 0; t < 2; ++t)
    CHECK(std::abs(m.vectors.col(t).norm() - 1.0) < 1e-12);

  // Tokens shorter than a trigram hash as a whole.
  const auto tiny = pxp::encode_query("ab", pxp::Mode::kMulti, w);
  CHECK(tiny.vectors.cols() == 1);
  CHECK(std::abs(tiny.vectors.col(0).norm() - 1.0) < 1e-12);
}

TEST_CASE("query encoding rejects empty input") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 1);
  CHECK_THROWS_AS(pxp::encode_query("", pxp::Mode::kSingle, w),
                  std::invalid_argument);
  CHECK_THROWS_AS(pxp::encode_query("   ", pxp::Mode::kMulti, w),
                  std::invalid_argument);
}

TEST_CASE("image encoding: constant image gives identical patch embeddings") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 3);
  const pxp::Image img = pxp::Image::constant(16, 16, 3, 0.6);
  const auto doc = pxp::encode_image(img, pxp::Mode::kMulti, w);
  REQUIRE(doc.vectors.cols() == 4);
  for (Index k = 1; k < 4; ++k)
    CHECK(doc.vectors.col(k) == doc.vectors.col(0));
  for (Index k = 0; k < 4; ++k)
    CHECK(std::abs(doc.vectors.col(k).norm() - 1.0) < 1e-12);
}

TEST_CASE("image encoding is deterministic") {
  const auto w = pxp::ScorerWeights::seeded(8, 32, 5);
  const pxp::Image img = random_image(16, 8, 77);
  const auto a = pxp::encode_image(img, pxp::Mode::kSingle, w);
  const auto b = pxp::encode_image(img, pxp::Mode::kSingle, w);
  CHECK(a.vectors == b.vectors);
  CHECK(a.vectors.cols() == 1);
  CHECK(std::abs(a.vectors.col(0).norm() - 1.0) < 1e-12);
}

TEST_CASE("single-mode score of a document against its own embedding is 1") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 9);
  const pxp::Image img = random_image(8, 8, 99);
  const auto doc = pxp::encode_image(img, pxp::Mode::kSingle, w);
  pxp::QueryEmbedding q;
  q.mode = pxp::Mode::kSingle;
  q.vectors = doc.vectors;
  CHECK(pxp::score(img, q, w) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("multi-mode score of orthogonal 1-token/1-patch pair is 0") {
  pxp::QueryEmbedding q;
  q.mode = pxp::Mode::kMulti;
  q.vectors = Eigen::MatrixXd::Zero(4, 1);
  q.vectors(0, 0) = 1.0;
  pxp::DocEmbedding doc;
  doc.mode = pxp::Mode::kMulti;
  doc.vectors = Eigen::MatrixXd::Zero(4, 1);
  doc.vectors(1, 0) = 1.0;
  CHECK(pxp::score_embeddings(q, doc) == 0.0);
}

TEST_CASE("MaxSim picks the best patch per token") {
  // Dot-product matrix [[0.9, 0.1], [0.2, 0.8]] by construction:
  // tokens are basis vectors, patches mix them plus orthogonal padding.
  pxp::QueryEmbedding q;
  q.mode = pxp::Mode::kMulti;
  q.vectors = Eigen::MatrixXd::Zero(4, 2);
  q.vectors(0, 0) = 1.0;
  q.vectors(1, 1) = 1.0;
  pxp::DocEmbedding doc;
  doc.mode = pxp::Mode::kMulti;
  doc.vectors = Eigen::MatrixXd::Zero(4, 2);
  doc.vectors(0, 0) = 0.9;
  doc.vectors(1, 0) = 0.2;
  doc.vectors(2, 0) = std::sqrt(1.0 - 0.9 * 0.9 - 0.2 * 0.2);
  doc.vectors(0, 1) = 0.1;
  doc.vectors(1, 1) = 0.8;
  doc.vectors(3, 1) = std::sqrt(1.0 - 0.1 * 0.1 - 0.8 * 0.8);
  CHECK(pxp::score_embeddings(q, doc) ==
        doctest::Approx(1.7).epsilon(1e-14));
}

TEST_CASE("MaxSim is invariant to patch permutation") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 21);
  const pxp::Image img = random_image(16, 16, 22);
  const auto doc = pxp::encode_image(img, pxp::Mode::kMulti, w);
  std::mt19937_64 eng(23);
  const auto q = random_query(16, pxp::Mode::kMulti, 3, eng);
  const double base = pxp::score_embeddings(q, doc);
  pxp::DocEmbedding shuffled = doc;
  shuffled.vectors.col(0).swap(shuffled.vectors.col(3));
  shuffled.vectors.col(1).swap(shuffled.vectors.col(2));
  CHECK(pxp::score_embeddings(q, shuffled) == base);
}

TEST_CASE("scoring rejects mismatched embedding modes") {
  pxp::QueryEmbedding q;
  q.mode = pxp::Mode::kSingle;
  q.vectors = Eigen::MatrixXd::Identity(4, 1);
  pxp::DocEmbedding doc;
  doc.mode = pxp::Mode::kMulti;
  doc.vectors = Eigen::MatrixXd::Identity(4, 1);
  CHECK_THROWS_AS(pxp::score_embeddings(q, doc), std::invalid_argument);
}

TEST_CASE("loss is the negative mean score") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 31);
  const pxp::Image img = random_image(8, 8, 32);
  const auto doc = pxp::encode_image(img, pxp::Mode::kSingle, w);
  const Eigen::VectorXd u = doc.vectors.col(0);

  // A unit vector orthogonal to u.
  Eigen::VectorXd basis = Eigen::VectorXd::Zero(16);
  basis[0] = 1.0;
  Eigen::VectorXd perp = basis - basis.dot(u) * u;
  if (perp.norm() < 1e-6) {
    basis.setZero();
    basis[1] = 1.0;
    perp = basis - basis.dot(u) * u;
  }
  perp.normalize();

  std::vector<pxp::QueryEmbedding> queries;
  for (double s : {0.1, 0.2, 0.3}) {
    pxp::QueryEmbedding q;
    q.mode = pxp::Mode::kSingle;
    q.vectors = s * u + std::sqrt(1.0 - s * s) * perp;
    queries.push_back(q);
  }
  CHECK(pxp::loss(img, queries, w) == doctest::Approx(-0.2).epsilon(1e-12));

  // Singleton mean is just the negated score.
  CHECK(pxp::loss(img, {queries[0]}, w) ==
        doctest::Approx(-0.1).epsilon(1e-12));
  // Duplicating a query does not move the mean.
  CHECK(pxp::loss(img, {queries[1], queries[1]}, w) ==
        doctest::Approx(pxp::loss(img, {queries[1]}, w)).epsilon(1e-14));
}

TEST_CASE("loss rejects an empty query set") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 41);
  const pxp::Image img = random_image(8, 8, 42);
  CHECK_THROWS_AS(pxp::loss(img, {}, w), std::invalid_argument);
}

TEST_CASE("zero projection makes embeddings degenerate, which is signalled") {
  auto w = pxp::ScorerWeights::seeded(8, 16, 51);
  w.projection.setZero();
  const pxp::Image img = random_image(8, 8, 52);
  std::mt19937_64 eng(53);
  const std::vector<pxp::QueryEmbedding> qs = {
      random_query(16, pxp::Mode::kSingle, 1, eng)};
  CHECK_THROWS_AS(pxp::encode_image(img, pxp::Mode::kSingle, w),
                  pxp::DegenerateEmbeddingError);
  CHECK_THROWS_AS(pxp::loss_and_grad(img, qs, w),
                  pxp::DegenerateEmbeddingError);
}

TEST_CASE("gradient has the image's shape") {
  const auto w = pxp::ScorerWeights::seeded(8, 16, 61);
  const pxp::Image img = random_image(16, 8, 62);
  std::mt19937_64 eng(63);
  const std::vector<pxp::QueryEmbedding> qs = {
      random_query(16, pxp::Mode::kMulti, 2, eng)};
  const pxp::Gradient g = pxp::grad_loss(img, qs, w);
  CHECK(g.same_shape(img));
}

// The load-bearing correctness check for everything downstream: the analytic
// gradient must match an independent central-difference oracle elementwise.
TEST_CASE("analytic gradient matches finite differences") {
  struct GradCase {
    Index h, w, patch, d, tokens;
    pxp::Mode mode;
    int queries;
  };
  std::vector<GradCase> cases;
  for (int i = 0; i < 48; ++i)
    cases.push_back({8, 8, 8, 16, 1 + i % 3,
                     (i % 2 == 0) ? pxp::Mode::kSingle : pxp::Mode::kMulti,
                     1 + i % 3});
  for (int i = 0; i < 24; ++i)
    cases.push_back({8, 8, 8, 8, 1 + i % 2,
                     (i % 2 == 0) ? pxp::Mode::kMulti : pxp::Mode::kSingle,
                     1 + i % 2});
  for (int i = 0; i < 16; ++i)
    cases.push_back({8, 8, 8, 32, 2, (i % 2 == 0) ? pxp::Mode::kSingle
                                                  : pxp::Mode::kMulti,
                     2});
  for (int i = 0; i < 8; ++i)
    cases.push_back({8, 8, 4, 16, 2, (i % 2 == 0) ? pxp::Mode::kMulti
                                                  : pxp::Mode::kSingle,
                     1 + i % 3});
  for (int i = 0; i < 4; ++i)
    cases.push_back({16, 16, 8, 16, 2,
                     (i % 2 == 0) ? pxp::Mode::kSingle : pxp::Mode::kMulti,
                     2});
  for (int i = 0; i < 4; ++i)
    cases.push_back({16, 8, 8, 12, 3,
                     (i % 2 == 0) ? pxp::Mode::kMulti : pxp::Mode::kSingle,
                     1});
  REQUIRE(cases.size() >= 100);

  const std::uint64_t root = 0x9d1cebab5a5aULL;
  double worst_rel = 0.0;
  Index checked = 0;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const GradCase& gc = cases[ci];
    const std::uint64_t seed =
        pxp::derive_seed(root, "gradcheck-" + std::to_string(ci));
    std::mt19937_64 eng(seed);
    pxp::Image img = random_image(gc.h, gc.w, seed ^ 0xabcdULL);
    if (ci % 5 == 0) {
      // Exercise saturated pixels too; the loss is defined beyond [0,1].
      for (Index i = 0; i < img.size(); i += 7)
        img.data[i] = (i % 2 == 0) ? 0.0 : 1.0;
    }
    const auto w = pxp::ScorerWeights::seeded(gc.patch, gc.d, seed ^ 0x77ULL);
    std::vector<pxp::QueryEmbedding> qs;
    for (int k = 0; k < gc.queries; ++k)
      qs.push_back(random_query(gc.d, gc.mode, gc.tokens, eng));

    const pxp::LossGrad lg = pxp::loss_and_grad(img, qs, w);
    // Value cross-check against the independent long-double forward pass.
    const double ref_value = static_cast<double>(pxp_testing::reference_loss(
        [&] {
          std::vector<long double> px(static_cast<std::size_t>(img.size()));
          for (Index i = 0; i < img.size(); ++i)
            px[static_cast<std::size_t>(i)] = img.data[i];
          return px;
        }(),
        img.h, img.w, img.c, w, qs));
    CHECK(lg.value == doctest::Approx(ref_value).epsilon(1e-12));
    CHECK(pxp::loss(img, qs, w) == doctest::Approx(lg.value).epsilon(1e-14));

    const pxp::Gradient fd = pxp_testing::finite_difference_grad(img, qs, w);
    for (Index i = 0; i < img.size(); ++i) {
      const double ga = lg.grad.data[i];
      const double gf = fd.data[i];
      if (std::abs(ga) <= 1e-8) continue;
      const double rel =
          std::abs(ga - gf) / std::max(std::abs(ga), std::abs(gf));
      if (rel > worst_rel) worst_rel = rel;
      ++checked;
    }
  }
  INFO("checked " << checked << " coordinates, worst relative error "
                  << worst_rel);
  CHECK(checked > 10000);
  CHECK(worst_rel < 1e-4);
}

TEST_CASE("a small step against the gradient decreases the loss") {
  const std::uint64_t root = 0x0ddfeedULL;
  for (int c = 0; c < 10; ++c) {
    const std::uint64_t seed =
        pxp::derive_seed(root, "descent-" + std::to_string(c));
    std::mt19937_64 eng(seed);
    const pxp::Mode mode = (c % 2 == 0) ? pxp::Mode::kSingle : pxp::Mode::kMulti;
    const pxp::Image img = random_image(8, 8, seed);
    const auto w = pxp::ScorerWeights::seeded(8, 16, seed ^ 0x3fULL);
    const std::vector<pxp::QueryEmbedding> qs = {
        random_query(16, mode, 2, eng)};
    const pxp::LossGrad lg = pxp::loss_and_grad(img, qs, w);
    const double gnorm = std::sqrt((lg.grad.data * lg.grad.data).sum());
    if (gnorm < 1e-6) continue;  // degenerate direction, nothing to test
    pxp::Image stepped = img;
    stepped.data -= (1e-5 / gnorm) * lg.grad.data;
    CHECK(pxp::loss(stepped, qs, w) <= lg.value + 1e-10);
  }
}
