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
#include "pixelpoison/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

namespace pxp {
namespace {

constexpr char kRawMagic[4] = {'P', 'X', 'P', '1'};
constexpr char kWeightsMagic[4] = {'S', 'C', 'W', '1'};

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double v) {
  append_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  void expect_magic(const char (&magic)[4], const char* what) {
    if (bytes_.size() < pos_ + 4 ||
        std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
      throw IoError(path_ + ": not a " + what + " file (bad magic)");
    pos_ += 4;
  }

  std::uint32_t read_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t read_u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }

  double read_f64() { return std::bit_cast<double>(read_u64()); }

  void expect_end() const {
    if (pos_ != bytes_.size())
      throw IoError(path_ + ": trailing bytes after payload");
  }

 private:
  void require(std::size_t n) {
    if (bytes_.size() < pos_ + n) throw IoError(path_ + ": truncated file");
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError(path + ": read failed");
  return std::move(buf).str();
}

void write_file_bytes(const std::string& bytes, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out.good()) throw IoError(path + ": write failed");
}

std::string lower_extension(const std::string& path) {
  const std::size_t dot = path.find_last_of('.');
  const std::size_t sep = path.find_last_of("/\\");
  if (dot == std::string::npos ||
      (sep != std::string::npos && dot < sep))
    return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) {
    return static_cast<char>(std::tolower(ch));
  });
  return ext;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* file = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (file) std::fclose(file);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* file = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
  }
};

}  // namespace

void save_raw(const Image& img, const std::string& path) {
  std::string bytes;
  bytes.reserve(16 + static_cast<std::size_t>(img.size()) * 8);
  bytes.append(kRawMagic, 4);
  append_u32(bytes, static_cast<std::uint32_t>(img.h));
  append_u32(bytes, static_cast<std::uint32_t>(img.w));
  append_u32(bytes, static_cast<std::uint32_t>(img.c));
  for (Index i = 0; i < img.size(); ++i) append_f64(bytes, img.data[i]);
  write_file_bytes(bytes, path);
}

Image load_raw(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  Cursor cur(bytes, path);
  cur.expect_magic(kRawMagic, "raw image");
  const Index h = static_cast<Index>(cur.read_u32());
  const Index w = static_cast<Index>(cur.read_u32());
  const Index c = static_cast<Index>(cur.read_u32());
  if (h < 1 || w < 1 || c < 1)
    throw IoError(path + ": invalid dimensions in header");
  Image img(h, w, c);
  for (Index i = 0; i < img.size(); ++i) img.data[i] = cur.read_f64();
  cur.expect_end();
  return img;
}

void save_png(const Image& img, const std::string& path) {
  if (img.c != 3)
    throw IoError(path + ": PNG output requires 3 channels, image has " +
                  std::to_string(img.c));
  require_valid_image(img, "save_png");
  if (img.h > std::numeric_limits<std::uint32_t>::max() ||
      img.w > std::numeric_limits<std::uint32_t>::max())
    throw IoError(path + ": image too large for PNG");

  PngWriteCloser s;
  s.file = std::fopen(path.c_str(), "wb");
  if (!s.file) throw IoError(path + ": cannot open for writing");
  s.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                  nullptr);
  if (!s.png) throw IoError(path + ": png_create_write_struct failed");
  s.info = png_create_info_struct(s.png);
  if (!s.info) throw IoError(path + ": png_create_info_struct failed");
  if (setjmp(png_jmpbuf(s.png)))
    throw IoError(path + ": libpng write error");

  png_init_io(s.png, s.file);
  png_set_IHDR(s.png, s.info, static_cast<png_uint_32>(img.w),
               static_cast<png_uint_32>(img.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(s.png, s.info);

  std::vector<png_byte> row(static_cast<std::size_t>(img.w) * 3);
  for (Index y = 0; y < img.h; ++y) {
    for (Index x = 0; x < img.w; ++x)
      for (Index ch = 0; ch < 3; ++ch)
        row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(ch)] =
            static_cast<png_byte>(std::lround(img.at(y, x, ch) * 255.0));
    png_write_row(s.png, row.data());
  }
  png_write_end(s.png, nullptr);
  if (std::fflush(s.file) != 0) throw IoError(path + ": write failed");
}

Image load_png(const std::string& path) {
  PngReadCloser s;
  s.file = std::fopen(path.c_str(), "rb");
  if (!s.file) throw IoError(path + ": cannot open for reading");

  png_byte header[8];
  if (std::fread(header, 1, 8, s.file) != 8 ||
      png_sig_cmp(header, 0, 8) != 0)
    throw IoError(path + ": not a PNG file");

  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!s.png) throw IoError(path + ": png_create_read_struct failed");
  s.info = png_create_info_struct(s.png);
  if (!s.info) throw IoError(path + ": png_create_info_struct failed");
  if (setjmp(png_jmpbuf(s.png)))
    throw IoError(path + ": libpng read error");

  png_init_io(s.png, s.file);
  png_set_sig_bytes(s.png, 8);
  png_read_info(s.png, s.info);

  const png_uint_32 w = png_get_image_width(s.png, s.info);
  const png_uint_32 h = png_get_image_height(s.png, s.info);
  const int color = png_get_color_type(s.png, s.info);
  const int depth = png_get_bit_depth(s.png, s.info);

  // Normalise everything to 8-bit RGB; refuse alpha rather than guessing a
  // background to composite against.
  if (color == PNG_COLOR_TYPE_RGBA || color == PNG_COLOR_TYPE_GA ||
      png_get_valid(s.png, s.info, PNG_INFO_tRNS))
    throw IoError(path + ": alpha channel not supported");
  if (depth == 16) png_set_strip_16(s.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(s.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(s.png);
  if (color == PNG_COLOR_TYPE_GRAY) png_set_gray_to_rgb(s.png);
  png_read_update_info(s.png, s.info);

  if (png_get_channels(s.png, s.info) != 3)
    throw IoError(path + ": expected 3 channels after decoding");

  Image img(static_cast<Index>(h), static_cast<Index>(w), 3);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
  for (Index y = 0; y < img.h; ++y) {
    png_read_row(s.png, row.data(), nullptr);
    for (Index x = 0; x < img.w; ++x)
      for (Index ch = 0; ch < 3; ++ch)
        img.at(y, x, ch) =
            static_cast<double>(
                row[static_cast<std::size_t>(x) * 3 +
                    static_cast<std::size_t>(ch)]) /
            255.0;
  }
  png_read_end(s.png, nullptr);
  return img;
}

void save_image(const Image& img, const std::string& path) {
  if (lower_extension(path) == "png")
    save_png(img, path);
  else
    save_raw(img, path);
}

Image load_image(const std::string& path) {
  if (lower_extension(path) == "png") return load_png(path);
  return load_raw(path);
}

void save_weights(const ScorerWeights& weights, const std::string& path) {
  std::string bytes;
  bytes.reserve(24 + static_cast<std::size_t>(weights.projection.size()) * 8);
  bytes.append(kWeightsMagic, 4);
  append_u32(bytes, static_cast<std::uint32_t>(weights.patch_side));
  append_u32(bytes, static_cast<std::uint32_t>(weights.embed_dim));
  append_u64(bytes, weights.rng_seed);
  for (Index r = 0; r < weights.projection.rows(); ++r)
    for (Index c = 0; c < weights.projection.cols(); ++c)
      append_f64(bytes, weights.projection(r, c));
  write_file_bytes(bytes, path);
}

ScorerWeights load_weights(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  Cursor cur(bytes, path);
  cur.expect_magic(kWeightsMagic, "scorer weights");
  ScorerWeights w;
  w.patch_side = static_cast<Index>(cur.read_u32());
  w.embed_dim = static_cast<Index>(cur.read_u32());
  w.rng_seed = cur.read_u64();
  if (w.patch_side < 1 || w.embed_dim < 1)
    throw IoError(path + ": invalid dimensions in header");
  w.projection.resize(w.embed_dim, w.input_dim());
  for (Index r = 0; r < w.projection.rows(); ++r)
    for (Index c = 0; c < w.projection.cols(); ++c)
      w.projection(r, c) = cur.read_f64();
  cur.expect_end();
  return w;
}

void save_text(const std::string& text, const std::string& path) {
  write_file_bytes(text, path);
}

std::string load_text(const std::string& path) {
  return read_file_bytes(path);
}

}  // namespace pxp
