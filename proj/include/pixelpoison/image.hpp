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

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace pxp {

using Eigen::Index;

/// Dense H x W x C field with channel-last, row-major layout: element
/// (y, x, ch) lives at flat index (y * w + x) * c + ch. Used for images
/// (intensities in [0, 1]), additive noise and pixel gradients alike.
template <class Scalar>
struct Tensor3 {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Index h = 0;
  Index w = 0;
  Index c = 0;
  Array data;

  Tensor3() = default;

  Tensor3(Index height, Index width, Index channels)
      : h(height), w(width), c(channels) {
    if (h < 1 || w < 1 || c < 1)
      throw std::invalid_argument("Tensor3: dimensions must be positive, got " +
                                  shape_string());
    data = Array::Zero(h * w * c);
  }

  Tensor3(Index height, Index width, Index channels, Array values)
      : h(height), w(width), c(channels), data(std::move(values)) {
    if (h < 1 || w < 1 || c < 1)
      throw std::invalid_argument("Tensor3: dimensions must be positive, got " +
                                  shape_string());
    if (data.size() != h * w * c)
      throw std::invalid_argument("Tensor3: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape " + shape_string());
  }

  static Tensor3 constant(Index height, Index width, Index channels, Scalar v) {
    Tensor3 t(height, width, channels);
    t.data.setConstant(v);
    return t;
  }

  Index size() const { return h * w * c; }

  Scalar& at(Index y, Index x, Index ch) { return data[(y * w + x) * c + ch]; }
  Scalar at(Index y, Index x, Index ch) const {
    return data[(y * w + x) * c + ch];
  }

  bool same_shape(const Tensor3& o) const {
    return h == o.h && w == o.w && c == o.c;
  }

  /// Zero tensor with this tensor's shape.
  Tensor3 zeros_like() const { return Tensor3(h, w, c); }

  std::string shape_string() const {
    return std::to_string(h) + "x" + std::to_string(w) + "x" +
           std::to_string(c);
  }
};

using Tensor3d = Tensor3<double>;
/// Adversarial document screenshot: pixel intensities in [0, 1].
using Image = Tensor3d;
/// Additive noise field paired with an Image of the same shape.
using Noise = Tensor3d;
/// Pixel gradient of a scalar loss, same shape as the image it refers to.
using Gradient = Tensor3d;

template <class Scalar>
bool is_valid_image(const Tensor3<Scalar>& t) {
  if (t.h < 1 || t.w < 1 || t.c < 1) return false;
  if (t.data.size() != t.size()) return false;
  return ((t.data >= Scalar(0)) && (t.data <= Scalar(1))).all();
}

template <class Scalar>
void require_valid_image(const Tensor3<Scalar>& t, const char* what) {
  if (!is_valid_image(t))
    throw std::invalid_argument(std::string(what) +
                                ": not a valid image (shape " +
                                t.shape_string() + ", pixels must be in [0,1])");
}

/// Saturates every element into [0, 1]. Total on any shape; idempotent.
template <class Scalar>
Tensor3<Scalar> clip_pixels(Tensor3<Scalar> t) {
  t.data = t.data.min(Scalar(1)).max(Scalar(0));
  return t;
}

namespace detail {

// a + t * (b - a): exact when a == b or t == 0, endpoints reproduced exactly.
template <class Scalar>
Scalar lerp(Scalar a, Scalar b, Scalar t) {
  return a + t * (b - a);
}

}  // namespace detail

/// Corner-aligned bilinear resampling to oh x ow. Output pixels are convex
/// combinations of input pixels, so a constant image stays constant and the
/// value range is preserved; resizing to the input size is the identity.
template <class Scalar>
Tensor3<Scalar> resize_bilinear(const Tensor3<Scalar>& img, Index oh, Index ow) {
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("resize_bilinear: target " +
                                std::to_string(oh) + "x" + std::to_string(ow) +
                                " must be positive");
  Tensor3<Scalar> out(oh, ow, img.c);
  for (Index i = 0; i < oh; ++i) {
    const double sy = (oh == 1) ? static_cast<double>(img.h - 1) / 2.0
                                : static_cast<double>(i) * (img.h - 1) / (oh - 1);
    const Index y0 = static_cast<Index>(std::floor(sy));
    const Index y1 = std::min(y0 + 1, img.h - 1);
    const Scalar fy = static_cast<Scalar>(sy - static_cast<double>(y0));
    for (Index j = 0; j < ow; ++j) {
      const double sx = (ow == 1)
                            ? static_cast<double>(img.w - 1) / 2.0
                            : static_cast<double>(j) * (img.w - 1) / (ow - 1);
      const Index x0 = static_cast<Index>(std::floor(sx));
      const Index x1 = std::min(x0 + 1, img.w - 1);
      const Scalar fx = static_cast<Scalar>(sx - static_cast<double>(x0));
      for (Index ch = 0; ch < img.c; ++ch) {
        const Scalar top =
            detail::lerp(img.at(y0, x0, ch), img.at(y0, x1, ch), fx);
        const Scalar bot =
            detail::lerp(img.at(y1, x0, ch), img.at(y1, x1, ch), fx);
        out.at(i, j, ch) = detail::lerp(top, bot, fy);
      }
    }
  }
  return clip_pixels(std::move(out));
}

/// Frame geometry for the mask attack: a margin of thickness
/// (margin_h, margin_w) around a centered inner_h x inner_w interior.
/// margin(i, j) is true exactly on the H*W - h*w border cells.
struct MaskSpec {
  double area = 0.0;  // requested margin area fraction a
  Index height = 0;
  Index width = 0;
  Index margin_h = 0;
  Index margin_w = 0;
  Index inner_h = 0;
  Index inner_w = 0;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> margin;

  bool in_interior(Index y, Index x) const {
    return inner_h > 0 && inner_w > 0 && y >= margin_h &&
           y < margin_h + inner_h && x >= margin_w && x < margin_w + inner_w;
  }

  Index margin_cell_count() const { return height * width - inner_h * inner_w; }

  /// Flat H*W*channels selector, true on every channel of a margin pixel.
  template <class Scalar = double>
  Eigen::Array<bool, Eigen::Dynamic, 1> flat_margin(Index channels) const {
    Eigen::Array<bool, Eigen::Dynamic, 1> sel(height * width * channels);
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x)
        for (Index ch = 0; ch < channels; ++ch)
          sel[(y * width + x) * channels + ch] = margin(y, x);
    return sel;
  }
};

/// Margin thickness is round(a * dim / 2) per axis so that a = 0 leaves the
/// image untouched and a = 1 hands the whole canvas to the margin; any
/// positive a on a dimension larger than 2 gets at least a one-pixel margin.
inline MaskSpec make_mask_spec(Index height, Index width, double a) {
  if (!(a >= 0.0 && a <= 1.0))
    throw std::invalid_argument("make_mask_spec: area fraction " +
                                std::to_string(a) + " outside [0,1]");
  if (height < 1 || width < 1)
    throw std::invalid_argument("make_mask_spec: dimensions must be positive");
  MaskSpec spec;
  spec.area = a;
  spec.height = height;
  spec.width = width;
  spec.margin_h = static_cast<Index>(std::llround(a * height / 2.0));
  spec.margin_w = static_cast<Index>(std::llround(a * width / 2.0));
  if (a > 0.0 && height > 2) spec.margin_h = std::max<Index>(spec.margin_h, 1);
  if (a > 0.0 && width > 2) spec.margin_w = std::max<Index>(spec.margin_w, 1);
  spec.inner_h = std::max<Index>(0, height - 2 * spec.margin_h);
  spec.inner_w = std::max<Index>(0, width - 2 * spec.margin_w);
  spec.margin.resize(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) spec.margin(y, x) = !spec.in_interior(y, x);
  return spec;
}

/// Shrinks the image into the spec's interior (bilinear) and paints the
/// margin white. With a = 0 this is the identity on the image.
template <class Scalar>
Tensor3<Scalar> compose_masked(const Tensor3<Scalar>& img, const MaskSpec& spec) {
  if (spec.height != img.h || spec.width != img.w)
    throw std::invalid_argument("compose_masked: spec built for " +
                                std::to_string(spec.height) + "x" +
                                std::to_string(spec.width) +
                                ", image is " + img.shape_string());
  Tensor3<Scalar> out =
      Tensor3<Scalar>::constant(img.h, img.w, img.c, Scalar(1));
  if (spec.inner_h > 0 && spec.inner_w > 0) {
    const Tensor3<Scalar> small =
        resize_bilinear(img, spec.inner_h, spec.inner_w);
    for (Index y = 0; y < spec.inner_h; ++y)
      for (Index x = 0; x < spec.inner_w; ++x)
        for (Index ch = 0; ch < img.c; ++ch)
          out.at(spec.margin_h + y, spec.margin_w + x, ch) = small.at(y, x, ch);
  }
  return out;
}

/// x + n, clipped back into [0, 1].
template <class Scalar>
Tensor3<Scalar> apply_noise(const Tensor3<Scalar>& img,
                            const Tensor3<Scalar>& noise) {
  if (!img.same_shape(noise))
    throw std::invalid_argument("apply_noise: noise shape " +
                                noise.shape_string() + " does not match image " +
                                img.shape_string());
  return clip_pixels(Tensor3<Scalar>(img.h, img.w, img.c, img.data + noise.data));
}

/// Splits the image into non-overlapping P x P patches, one flattened patch
/// per column in row-major patch order; within a patch the layout is
/// row-major, channel-last (length P*P*C).
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> patchify(
    const Tensor3<Scalar>& img, Index patch_side) {
  if (patch_side < 1)
    throw std::invalid_argument("patchify: patch side must be positive");
  if (img.h % patch_side != 0 || img.w % patch_side != 0)
    throw std::invalid_argument("patchify: patch side " +
                                std::to_string(patch_side) +
                                " does not divide image " + img.shape_string());
  const Index py = img.h / patch_side;
  const Index px = img.w / patch_side;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> patches(
      patch_side * patch_side * img.c, py * px);
  for (Index by = 0; by < py; ++by)
    for (Index bx = 0; bx < px; ++bx) {
      const Index col = by * px + bx;
      Index row = 0;
      for (Index dy = 0; dy < patch_side; ++dy)
        for (Index dx = 0; dx < patch_side; ++dx)
          for (Index ch = 0; ch < img.c; ++ch)
            patches(row++, col) =
                img.at(by * patch_side + dy, bx * patch_side + dx, ch);
    }
  return patches;
}

/// Inverse of patchify: reassembles the tensor bit-exactly.
template <class Scalar>
Tensor3<Scalar> unpatchify(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& patches,
    Index height, Index width, Index channels, Index patch_side) {
  if (patch_side < 1 || height % patch_side != 0 || width % patch_side != 0)
    throw std::invalid_argument("unpatchify: patch side must divide dimensions");
  const Index py = height / patch_side;
  const Index px = width / patch_side;
  if (patches.rows() != patch_side * patch_side * channels ||
      patches.cols() != py * px)
    throw std::invalid_argument("unpatchify: patch matrix shape mismatch");
  Tensor3<Scalar> img(height, width, channels);
  for (Index by = 0; by < py; ++by)
    for (Index bx = 0; bx < px; ++bx) {
      const Index col = by * px + bx;
      Index row = 0;
      for (Index dy = 0; dy < patch_side; ++dy)
        for (Index dx = 0; dx < patch_side; ++dx)
          for (Index ch = 0; ch < channels; ++ch)
            img.at(by * patch_side + dy, bx * patch_side + dx, ch) =
                patches(row++, col);
    }
  return img;
}

}  // namespace pxp
