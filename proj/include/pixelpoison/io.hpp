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

#include <stdexcept>
#include <string>

#include "pixelpoison/image.hpp"
#include "pixelpoison/scorer.hpp"

namespace pxp {

/// File-level failure carrying the offending path in its message.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Raw float container: magic "PXP1", three u32 little-endian dimensions
/// (height, width, channels), then height*width*channels f64 little-endian
/// values, row-major, channel-last. Round-trips bit-exactly.
void save_raw(const Image& img, const std::string& path);
Image load_raw(const std::string& path);

/// 8-bit RGB PNG, no alpha. Values quantize as round(v * 255) on save and
/// byte / 255 on load; 0.0 and 1.0 survive the round-trip exactly.
void save_png(const Image& img, const std::string& path);
Image load_png(const std::string& path);

/// Dispatches on the file extension: ".png" (case-insensitive) is PNG,
/// anything else the raw container.
void save_image(const Image& img, const std::string& path);
Image load_image(const std::string& path);

/// Scorer weights container: magic "SCW1", u32 patch_side, u32 embed_dim,
/// u64 rng_seed, then embed_dim * (patch_side^2 * 3) f64 little-endian
/// projection entries, row-major. Round-trips bit-exactly.
void save_weights(const ScorerWeights& weights, const std::string& path);
ScorerWeights load_weights(const std::string& path);

/// Whole-file text helpers used for CSV / JSON / corpus sidecar files.
void save_text(const std::string& text, const std::string& path);
std::string load_text(const std::string& path);

}  // namespace pxp
