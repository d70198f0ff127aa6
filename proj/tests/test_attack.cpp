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

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pixelpoison/attack.hpp"
#include "pixelpoison/hashing.hpp"
#include "pixelpoison/image.hpp"
#include "pixelpoison/scorer.hpp"

namespace {

using pxp::Index;

pxp::Image random_image(Index h, Index w, std::uint64_t seed) {
  pxp::Image img(h, w, 3);
  std::mt19937_64 eng(seed);
  for (Index i = 0; i < img.size(); ++i) img.data[i] = pxp::unit_real(eng);
  return img;
}

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

struct Setup {
  pxp::Image x;
  pxp::ScorerWeights weights;
  std::vector<pxp::QueryEmbedding> queries;
};

Setup make_setup(pxp::Mode mode, std::uint64_t seed) {
  Setup s{random_image(8, 8, seed), pxp::ScorerWeights::seeded(8, 16, seed ^ 1),
          {}};
  std::mt19937_64 eng(seed ^ 2);
  for (int i = 0; i < 3; ++i)
    s.queries.push_back(random_query(16, mode, 2, eng));
  return s;
}

}  // namespace

TEST_CASE("top-p mask keeps the largest-magnitude half") {
  pxp::Gradient g(1, 4, 1);
  g.data << 0.9, -0.5, 0.1, 0.05;
  const auto sel = pxp::top_p_mask(g, 0.5);
  CHECK(sel[0]);
  CHECK(sel[1]);
  CHECK_FALSE(sel[2]);
  CHECK_FALSE(sel[3]);
}

TEST_CASE("top-p mask with p=1 selects everything") {
  pxp::Gradient g(2, 2, 1);
  g.data << 0.0, -1.0, 2.0, 0.5;
  CHECK(pxp::top_p_mask(g, 1.0).all());
}

TEST_CASE("top-p mask breaks magnitude ties toward the lowest flat index") {
  pxp::Gradient g(1, 4, 1);
  g.data << 0.5, 0.5, -0.5, 0.5;
  const auto sel = pxp::top_p_mask(g, 0.25);
  CHECK(sel[0]);
  CHECK_FALSE(sel[1]);
  CHECK_FALSE(sel[2]);
  CHECK_FALSE(sel[3]);
}

TEST_CASE("top-p mask count is max(1, floor(p*N))") {
  pxp::Gradient g(1, 10, 1);
  for (Index i = 0; i < 10; ++i) g.data[i] = static_cast<double>(i + 1);
  CHECK(pxp::top_p_mask(g, 0.05).count() == 1);  // floor(0.5) -> clamp to 1
  CHECK(pxp::top_p_mask(g, 0.3).count() == 3);   // 0.3*10 must floor to 3
  CHECK(pxp::top_p_mask(g, 0.99).count() == 9);
}

TEST_CASE("top-p mask rejects out-of-range fractions") {
  pxp::Gradient g(1, 4, 1);
  CHECK_THROWS_AS(pxp::top_p_mask(g, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pxp::top_p_mask(g, 1.5), std::invalid_argument);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(pxp::cosine_lr(0, 100, 0.25) == 0.25);
  CHECK(pxp::cosine_lr(100, 100, 0.25) == 0.0);
  CHECK(pxp::cosine_lr(50, 100, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(pxp::cosine_lr(5, 4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(pxp::cosine_lr(0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(pxp::cosine_lr(-1, 4, 1.0), std::invalid_argument);
}

TEST_CASE("direct attack with zero steps returns the input") {
  const Setup s = make_setup(pxp::Mode::kSingle, 101);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  cfg.steps = 0;
  const pxp::AttackResult res =
      pxp::attack_direct(s.x, s.queries, s.weights, cfg);
  CHECK((res.adversarial.data == s.x.data).all());
  CHECK(res.trajectory.size() == 1);
  CHECK(res.best_step == 0);
}

TEST_CASE("direct attack improves the loss and stays in range") {
  const Setup s = make_setup(pxp::Mode::kSingle, 103);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  cfg.steps = 60;
  cfg.lr0 = 16.0 / 255.0;
  cfg.grad_fraction = 1.0;
  const pxp::AttackResult res =
      pxp::attack_direct(s.x, s.queries, s.weights, cfg);
  CHECK(res.trajectory.size() == 61);
  CHECK(pxp::is_valid_image(res.adversarial));
  const double initial = res.trajectory.front().loss;
  CHECK(res.best_loss < initial);
  CHECK(pxp::loss(res.adversarial, s.queries, s.weights) ==
        doctest::Approx(res.best_loss).epsilon(1e-14));
  CHECK(res.trajectory[static_cast<std::size_t>(res.best_step)].loss ==
        res.best_loss);
  for (const auto& p : res.trajectory) CHECK(p.loss >= res.best_loss);
}

TEST_CASE("direct attack trajectory records the schedule it used") {
  const Setup s = make_setup(pxp::Mode::kMulti, 107);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  cfg.steps = 10;
  cfg.lr0 = 0.05;
  const pxp::AttackResult res =
      pxp::attack_direct(s.x, s.queries, s.weights, cfg);
  REQUIRE(res.trajectory.size() == 11);
  CHECK(res.trajectory[0].step == 0);
  CHECK(res.trajectory[0].lr == cfg.lr0);
  CHECK(res.trajectory[0].grad_norm == 0.0);
  CHECK(res.trajectory[0].pixels_changed == 0);
  for (std::size_t i = 1; i < res.trajectory.size(); ++i) {
    CHECK(res.trajectory[i].step == static_cast<Index>(i));
    CHECK(res.trajectory[i].lr ==
          pxp::cosine_lr(static_cast<Index>(i) - 1, cfg.steps, cfg.lr0));
    CHECK(res.trajectory[i].grad_norm > 0.0);
  }
}

TEST_CASE("direct attack changes at most the selected fraction per step") {
  const Setup s = make_setup(pxp::Mode::kSingle, 109);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  cfg.steps = 20;
  cfg.lr0 = 0.03;
  cfg.grad_fraction = 0.05;  // floor(0.05 * 192) = 9 positions
  const pxp::AttackResult res =
      pxp::attack_direct(s.x, s.queries, s.weights, cfg);
  const Index bound = 9;
  for (std::size_t i = 1; i < res.trajectory.size(); ++i)
    CHECK(res.trajectory[i].pixels_changed <= bound);
}

TEST_CASE("direct attack is deterministic") {
  const Setup s = make_setup(pxp::Mode::kMulti, 113);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  cfg.steps = 25;
  cfg.lr0 = 0.04;
  cfg.grad_fraction = 0.5;
  const auto a = pxp::attack_direct(s.x, s.queries, s.weights, cfg);
  const auto b = pxp::attack_direct(s.x, s.queries, s.weights, cfg);
  CHECK((a.adversarial.data == b.adversarial.data).all());
  CHECK(a.best_step == b.best_step);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i)
    CHECK(a.trajectory[i].loss == b.trajectory[i].loss);
}

TEST_CASE("attack entry points reject a mismatched method") {
  const Setup s = make_setup(pxp::Mode::kSingle, 127);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kNoise;
  CHECK_THROWS_AS(pxp::attack_direct(s.x, s.queries, s.weights, cfg),
                  std::invalid_argument);
  cfg.method = pxp::Method::kDirect;
  CHECK_THROWS_AS(pxp::attack_noise(s.x, s.queries, s.weights, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(pxp::attack_masked(s.x, s.queries, s.weights, cfg),
                  std::invalid_argument);
}

TEST_CASE("attack config validation") {
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  cfg.grad_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.grad_fraction = 0.5;
  cfg.lr0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.lr0 = 0.1;
  cfg.steps = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.steps = 10;
  CHECK_NOTHROW(cfg.validate());
  cfg.method = pxp::Method::kMask;
  cfg.mask_area = 1.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("noise attack with zero steps returns the input and zero noise") {
  const Setup s = make_setup(pxp::Mode::kSingle, 131);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kNoise;
  cfg.steps = 0;
  const pxp::AttackResult res =
      pxp::attack_noise(s.x, s.queries, s.weights, cfg);
  REQUIRE(res.noise.has_value());
  CHECK((res.noise->data == 0.0).all());
  CHECK((res.adversarial.data == s.x.data).all());
}

TEST_CASE("noise attack output is exactly the clipped composite") {
  const Setup s = make_setup(pxp::Mode::kMulti, 137);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kNoise;
  cfg.steps = 40;
  cfg.lr0 = 16.0 / 255.0;
  cfg.grad_fraction = 0.8;
  const pxp::Image frozen = s.x;
  const pxp::AttackResult res =
      pxp::attack_noise(s.x, s.queries, s.weights, cfg);
  // The seed image is never mutated.
  CHECK((s.x.data == frozen.data).all());
  REQUIRE(res.noise.has_value());
  const pxp::Image composite = pxp::apply_noise(s.x, *res.noise);
  CHECK((res.adversarial.data == composite.data).all());
  CHECK(pxp::is_valid_image(res.adversarial));
  // Noise respects the elementwise clamp that keeps x + n in range.
  CHECK((res.noise->data >= -s.x.data - 1e-15).all());
  CHECK((res.noise->data <= 1.0 - s.x.data + 1e-15).all());
  const double initial = res.trajectory.front().loss;
  CHECK(res.best_loss < initial);
}

TEST_CASE("noise attack is deterministic") {
  const Setup s = make_setup(pxp::Mode::kSingle, 139);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kNoise;
  cfg.steps = 15;
  cfg.lr0 = 0.05;
  const auto a = pxp::attack_noise(s.x, s.queries, s.weights, cfg);
  const auto b = pxp::attack_noise(s.x, s.queries, s.weights, cfg);
  CHECK((a.adversarial.data == b.adversarial.data).all());
  CHECK((a.noise->data == b.noise->data).all());
}

TEST_CASE("mask attack with zero area never changes the image") {
  const Setup s = make_setup(pxp::Mode::kSingle, 149);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kMask;
  cfg.steps = 12;
  cfg.mask_area = 0.0;
  const pxp::AttackResult res =
      pxp::attack_masked(s.x, s.queries, s.weights, cfg);
  CHECK((res.adversarial.data == s.x.data).all());
  CHECK(res.trajectory.size() == 13);
  for (const auto& p : res.trajectory) {
    CHECK(p.pixels_changed == 0);
    CHECK(p.grad_norm == 0.0);
    CHECK(p.loss == res.trajectory[0].loss);
  }
}

TEST_CASE("mask attack keeps the shrunken page bit-exact and edits the frame") {
  const Setup s = make_setup(pxp::Mode::kMulti, 151);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kMask;
  cfg.steps = 30;
  cfg.lr0 = 16.0 / 255.0;
  cfg.mask_area = 0.5;
  const pxp::MaskSpec spec = pxp::make_mask_spec(s.x.h, s.x.w, cfg.mask_area);
  const pxp::Image start = pxp::compose_masked(s.x, spec);
  const pxp::AttackResult res =
      pxp::attack_masked(s.x, s.queries, s.weights, cfg);
  CHECK(pxp::is_valid_image(res.adversarial));
  bool frame_changed = false;
  for (Index y = 0; y < s.x.h; ++y)
    for (Index x = 0; x < s.x.w; ++x)
      for (Index ch = 0; ch < 3; ++ch) {
        if (spec.in_interior(y, x)) {
          CHECK(res.adversarial.at(y, x, ch) == start.at(y, x, ch));
        } else if (res.adversarial.at(y, x, ch) != start.at(y, x, ch)) {
          frame_changed = true;
        }
      }
  CHECK(frame_changed);
  CHECK(res.best_loss < res.trajectory.front().loss);
}

TEST_CASE("mask attack with full area may repaint everything") {
  const Setup s = make_setup(pxp::Mode::kSingle, 157);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kMask;
  cfg.steps = 10;
  cfg.lr0 = 0.05;
  cfg.mask_area = 1.0;
  const pxp::AttackResult res =
      pxp::attack_masked(s.x, s.queries, s.weights, cfg);
  CHECK(pxp::is_valid_image(res.adversarial));
  CHECK(res.trajectory.size() == 11);
  CHECK(res.best_loss <= res.trajectory.front().loss);
}

TEST_CASE("mask attack is deterministic") {
  const Setup s = make_setup(pxp::Mode::kMulti, 163);
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kMask;
  cfg.steps = 18;
  cfg.lr0 = 0.06;
  cfg.mask_area = 0.4;
  const auto a = pxp::attack_masked(s.x, s.queries, s.weights, cfg);
  const auto b = pxp::attack_masked(s.x, s.queries, s.weights, cfg);
  CHECK((a.adversarial.data == b.adversarial.data).all());
  CHECK(a.best_step == b.best_step);
}

TEST_CASE("run_attack dispatches on the configured method") {
  const Setup s = make_setup(pxp::Mode::kSingle, 167);
  pxp::AttackConfig cfg;
  cfg.steps = 5;
  cfg.lr0 = 0.05;
  cfg.method = pxp::Method::kNoise;
  const auto res = pxp::run_attack(s.x, s.queries, s.weights, cfg);
  CHECK(res.noise.has_value());
  cfg.method = pxp::Method::kDirect;
  CHECK_FALSE(pxp::run_attack(s.x, s.queries, s.weights, cfg).noise.has_value());
}

TEST_CASE("attack rejects an invalid start image") {
  Setup s = make_setup(pxp::Mode::kSingle, 173);
  s.x.data[0] = 1.5;
  pxp::AttackConfig cfg;
  cfg.method = pxp::Method::kDirect;
  CHECK_THROWS_AS(pxp::attack_direct(s.x, s.queries, s.weights, cfg),
                  std::invalid_argument);
}

TEST_CASE("trajectory CSV has a header and one row per point") {
  std::vector<pxp::TrajectoryPoint> traj = {{0, 1.0, -0.25, 0.0, 0},
                                            {1, 0.5, -0.5, 2.25, 12}};
  const std::string csv = pxp::format_trajectory_csv(traj);
  CHECK(csv.rfind("step,lr,loss,grad_norm,pixels_changed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\n0,1,-0.25,0,0\n") != std::string::npos);
  CHECK(csv.find("\n1,0.5,-0.5,2.25,12\n") != std::string::npos);
}

TEST_CASE("method names round-trip") {
  for (pxp::Method m :
       {pxp::Method::kDirect, pxp::Method::kNoise, pxp::Method::kMask})
    CHECK(pxp::method_from_name(pxp::method_name(m)) == m);
  CHECK_THROWS_AS(pxp::method_from_name("sideways"), std::invalid_argument);
}
