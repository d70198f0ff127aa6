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
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pixelpoison/image.hpp"
#include "pixelpoison/scorer.hpp"

namespace pxp {

/// The three pixel-poisoning optimisation strategies.
enum class Method { kDirect, kNoise, kMask };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kDirect: return "direct";
    case Method::kNoise: return "noise";
    case Method::kMask: return "mask";
  }
  throw std::logic_error("method_name: unreachable");
}

inline Method method_from_name(std::string_view name) {
  if (name == "direct") return Method::kDirect;
  if (name == "noise") return Method::kNoise;
  if (name == "mask") return Method::kMask;
  throw std::invalid_argument("unknown attack method: " + std::string(name));
}

struct AttackConfig {
  Method method = Method::kDirect;
  Index steps = 3000;          // T
  double lr0 = 1.0;            // schedule peak, in pixel units
  double grad_fraction = 1.0;  // p, direct/noise only
  double mask_area = 0.2;      // a, mask only
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (steps < 0)
      throw std::invalid_argument("AttackConfig: steps must be >= 0");
    if (!(lr0 > 0.0))
      throw std::invalid_argument("AttackConfig: lr0 must be > 0");
    if (method == Method::kMask) {
      if (!(mask_area >= 0.0 && mask_area <= 1.0))
        throw std::invalid_argument("AttackConfig: mask_area outside [0,1]");
    } else {
      if (!(grad_fraction > 0.0 && grad_fraction <= 1.0))
        throw std::invalid_argument(
            "AttackConfig: grad_fraction outside (0,1]");
    }
  }
};

/// One trajectory row. Entry i >= 1 describes the update that produced
/// iterate i: the learning rate and masked-gradient norm that were applied,
/// the number of scalar positions that changed, and the loss of the new
/// iterate. Entry 0 carries the initial loss with the schedule's start rate.
struct TrajectoryPoint {
  Index step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  Index pixels_changed = 0;
};

struct AttackResult {
  Image adversarial;
  std::optional<Noise> noise;  // noise method only
  std::vector<TrajectoryPoint> trajectory;
  Index best_step = 0;
  double best_loss = 0.0;
};

/// Selects the m = max(1, floor(p*N)) positions of largest |grad|, ties
/// broken toward the lowest flat index. Returned selector is flat in the
/// tensor's own layout.
inline Eigen::Array<bool, Eigen::Dynamic, 1> top_p_mask(const Gradient& grad,
                                                        double p) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("top_p_mask: fraction " + std::to_string(p) +
                                " outside (0,1]");
  const Index n = grad.size();
  Eigen::Array<bool, Eigen::Dynamic, 1> sel(n);
  if (p == 1.0) {
    sel.setConstant(true);
    return sel;
  }
  // The epsilon absorbs representation error in p*N (e.g. 0.3 * 10 ->
  // 2.999...) so the count matches the exact-arithmetic floor.
  const Index m = std::max<Index>(
      1, static_cast<Index>(std::floor(p * static_cast<double>(n) + 1e-12)));
  if (m >= n) {
    sel.setConstant(true);
    return sel;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + m, order.end(),
                    [&grad](Index a, Index b) {
                      const double ma = std::abs(grad.data[a]);
                      const double mb = std::abs(grad.data[b]);
                      if (ma != mb) return ma > mb;
                      return a < b;
                    });
  sel.setConstant(false);
  for (Index i = 0; i < m; ++i) sel[order[static_cast<std::size_t>(i)]] = true;
  return sel;
}

/// Half-cosine decay from lr0 at i = 0 to 0 at i = T.
inline double cosine_lr(Index i, Index total, double lr0) {
  if (total < 1)
    throw std::invalid_argument("cosine_lr: total steps must be >= 1");
  if (i < 0 || i > total)
    throw std::invalid_argument("cosine_lr: step " + std::to_string(i) +
                                " outside [0," + std::to_string(total) + "]");
  return lr0 * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(total)));
}

namespace detail {

/// sign with sign(0) = 0, so unselected (zeroed) coordinates receive exactly
/// no update.
inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// alpha * sign(grad restricted to sel); also reports the L2 norm of the
/// restricted gradient.
inline Tensor3d::Array masked_sign_step(
    const Gradient& grad, const Eigen::Array<bool, Eigen::Dynamic, 1>& sel,
    double alpha, double* grad_norm_out) {
  Tensor3d::Array step = Tensor3d::Array::Zero(grad.size());
  double sq = 0.0;
  for (Index i = 0; i < grad.size(); ++i) {
    if (!sel[i]) continue;
    const double g = grad.data[i];
    sq += g * g;
    step[i] = alpha * sign_of(g);
  }
  *grad_norm_out = std::sqrt(sq);
  return step;
}

inline Index count_changed(const Tensor3d::Array& a, const Tensor3d::Array& b) {
  return (a != b).count();
}

}  // namespace detail

/// Iterated gradient-sign descent on the pixels themselves:
/// x_{i+1} = clip(x_i - alpha_i * sign(grad ⊙ top_p_mask)).
inline AttackResult attack_direct(const Image& x,
                                  const std::vector<QueryEmbedding>& queries,
                                  const ScorerWeights& weights,
                                  const AttackConfig& cfg) {
  if (cfg.method != Method::kDirect)
    throw std::invalid_argument("attack_direct: config method mismatch");
  cfg.validate();
  require_valid_image(x, "attack_direct");

  AttackResult res;
  Image cur = x;
  double cur_loss;
  LossGrad lg;
  if (cfg.steps > 0) {
    lg = loss_and_grad(cur, queries, weights);
    cur_loss = lg.value;
  } else {
    cur_loss = loss(cur, queries, weights);
  }
  res.trajectory.push_back({0, cfg.lr0, cur_loss, 0.0, 0});
  res.adversarial = cur;
  res.best_step = 0;
  res.best_loss = cur_loss;

  for (Index i = 0; i < cfg.steps; ++i) {
    const double alpha = cosine_lr(i, cfg.steps, cfg.lr0);
    const auto sel = top_p_mask(lg.grad, cfg.grad_fraction);
    double grad_norm = 0.0;
    const auto step = detail::masked_sign_step(lg.grad, sel, alpha, &grad_norm);
    Image next = clip_pixels(Image(cur.h, cur.w, cur.c, cur.data - step));
    const Index changed = detail::count_changed(cur.data, next.data);
    cur = std::move(next);
    double next_loss;
    if (i + 1 < cfg.steps) {
      lg = loss_and_grad(cur, queries, weights);
      next_loss = lg.value;
    } else {
      next_loss = loss(cur, queries, weights);
    }
    res.trajectory.push_back({i + 1, alpha, next_loss, grad_norm, changed});
    if (next_loss < res.best_loss) {
      res.best_loss = next_loss;
      res.best_step = i + 1;
      res.adversarial = cur;
    }
  }
  return res;
}

/// Learns an additive noise field over a frozen image. The noise starts at
/// zero and is clamped elementwise into [-x, 1-x] after every step so the
/// composite x + n is always a valid image; the adversarial output is
/// apply_noise(x, best n).
inline AttackResult attack_noise(const Image& x,
                                 const std::vector<QueryEmbedding>& queries,
                                 const ScorerWeights& weights,
                                 const AttackConfig& cfg) {
  if (cfg.method != Method::kNoise)
    throw std::invalid_argument("attack_noise: config method mismatch");
  cfg.validate();
  require_valid_image(x, "attack_noise");

  AttackResult res;
  Noise n = x.zeros_like();
  Image composite = apply_noise(x, n);
  double cur_loss;
  LossGrad lg;
  if (cfg.steps > 0) {
    lg = loss_and_grad(composite, queries, weights);
    cur_loss = lg.value;
  } else {
    cur_loss = loss(composite, queries, weights);
  }
  res.trajectory.push_back({0, cfg.lr0, cur_loss, 0.0, 0});
  Noise best_n = n;
  res.best_step = 0;
  res.best_loss = cur_loss;

  const Tensor3d::Array lo = -x.data;
  const Tensor3d::Array hi = 1.0 - x.data;
  for (Index i = 0; i < cfg.steps; ++i) {
    const double alpha = cosine_lr(i, cfg.steps, cfg.lr0);
    // d(loss)/d(noise) equals the pixel gradient at the composite.
    const auto sel = top_p_mask(lg.grad, cfg.grad_fraction);
    double grad_norm = 0.0;
    const auto step = detail::masked_sign_step(lg.grad, sel, alpha, &grad_norm);
    n.data = (n.data - step).max(lo).min(hi);
    Image next = apply_noise(x, n);
    const Index changed = detail::count_changed(composite.data, next.data);
    composite = std::move(next);
    double next_loss;
    if (i + 1 < cfg.steps) {
      lg = loss_and_grad(composite, queries, weights);
      next_loss = lg.value;
    } else {
      next_loss = loss(composite, queries, weights);
    }
    res.trajectory.push_back({i + 1, alpha, next_loss, grad_norm, changed});
    if (next_loss < res.best_loss) {
      res.best_loss = next_loss;
      res.best_step = i + 1;
      best_n = n;
    }
  }
  res.adversarial = apply_noise(x, best_n);
  res.noise = std::move(best_n);
  return res;
}

/// Shrinks the page into the interior of a white frame and optimises only
/// the frame: the gradient is zeroed outside the margin, so the interior of
/// the composed start image survives bit-exactly in the output. No top-p
/// selection — the margin itself is the modifiable set.
inline AttackResult attack_masked(const Image& x,
                                  const std::vector<QueryEmbedding>& queries,
                                  const ScorerWeights& weights,
                                  const AttackConfig& cfg) {
  if (cfg.method != Method::kMask)
    throw std::invalid_argument("attack_masked: config method mismatch");
  cfg.validate();
  require_valid_image(x, "attack_masked");

  const MaskSpec spec = make_mask_spec(x.h, x.w, cfg.mask_area);
  AttackResult res;
  Image cur = compose_masked(x, spec);

  if (spec.margin_cell_count() == 0) {
    // Nothing is modifiable: every iterate equals the start image.
    const double l0 = loss(cur, queries, weights);
    res.trajectory.push_back({0, cfg.lr0, l0, 0.0, 0});
    for (Index i = 1; i <= cfg.steps; ++i)
      res.trajectory.push_back({i, cosine_lr(i - 1, cfg.steps, cfg.lr0), l0,
                                0.0, 0});
    res.adversarial = std::move(cur);
    res.best_step = 0;
    res.best_loss = l0;
    return res;
  }

  const auto sel = spec.flat_margin(cur.c);
  double cur_loss;
  LossGrad lg;
  if (cfg.steps > 0) {
    lg = loss_and_grad(cur, queries, weights);
    cur_loss = lg.value;
  } else {
    cur_loss = loss(cur, queries, weights);
  }
  res.trajectory.push_back({0, cfg.lr0, cur_loss, 0.0, 0});
  res.adversarial = cur;
  res.best_step = 0;
  res.best_loss = cur_loss;

  for (Index i = 0; i < cfg.steps; ++i) {
    const double alpha = cosine_lr(i, cfg.steps, cfg.lr0);
    double grad_norm = 0.0;
    const auto step = detail::masked_sign_step(lg.grad, sel, alpha, &grad_norm);
    Image next = clip_pixels(Image(cur.h, cur.w, cur.c, cur.data - step));
    const Index changed = detail::count_changed(cur.data, next.data);
    cur = std::move(next);
    double next_loss;
    if (i + 1 < cfg.steps) {
      lg = loss_and_grad(cur, queries, weights);
      next_loss = lg.value;
    } else {
      next_loss = loss(cur, queries, weights);
    }
    res.trajectory.push_back({i + 1, alpha, next_loss, grad_norm, changed});
    if (next_loss < res.best_loss) {
      res.best_loss = next_loss;
      res.best_step = i + 1;
      res.adversarial = cur;
    }
  }
  return res;
}

/// Method dispatch on cfg.method.
inline AttackResult run_attack(const Image& x,
                               const std::vector<QueryEmbedding>& queries,
                               const ScorerWeights& weights,
                               const AttackConfig& cfg) {
  switch (cfg.method) {
    case Method::kDirect: return attack_direct(x, queries, weights, cfg);
    case Method::kNoise: return attack_noise(x, queries, weights, cfg);
    case Method::kMask: return attack_masked(x, queries, weights, cfg);
  }
  throw std::logic_error("run_attack: unreachable");
}

/// CSV serialisation of a trajectory; %.17g keeps doubles round-trippable.
inline std::string format_trajectory_csv(
    const std::vector<TrajectoryPoint>& trajectory) {
  std::string out = "step,lr,loss,grad_norm,pixels_changed\n";
  char buf[160];
  for (const TrajectoryPoint& p : trajectory) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%lld\n",
                  static_cast<long long>(p.step), p.lr, p.loss, p.grad_norm,
                  static_cast<long long>(p.pixels_changed));
    out += buf;
  }
  return out;
}

}  // namespace pxp
