// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal RGB raster type with binary PPM I/O, bilinear resizing, cropping
// and the separable Gaussian blur used by the synthetic generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "opiq/error.hpp"

namespace opiq {

// Interleaved RGB, double samples in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // size = width * height * 3

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3,
               fill) {}

  double& at(int x, int y, int ch) {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(ch)];
  }
  double at(int x, int y, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(ch)];
  }

  void clamp01() {
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
  }
};

// Binary PPM (P6, 8-bit). Grayscale and other magic numbers are rejected;
// the pipeline is RGB-only.
inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError,
          "cannot open image file " + path.string());
  std::string magic;
  in >> magic;
  require(!magic.empty(), ErrorKind::ParseError,
          "empty image file " + path.string());
  require(magic == "P6", ErrorKind::FormatError,
          "image " + path.string() + " is not binary RGB PPM (P6), got '" +
              magic + "'");
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    raise(ErrorKind::ParseError, "truncated PPM header in " + path.string());
  };
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    raise(ErrorKind::ParseError, "malformed PPM header in " + path.string());
  }
  require(w > 0 && h > 0, ErrorKind::ParseError,
          "bad PPM dimensions in " + path.string());
  require(maxval == 255, ErrorKind::FormatError,
          "only 8-bit PPM is supported: " + path.string());
  in.get();  // single whitespace after maxval
  const std::size_t count = static_cast<std::size_t>(w) *
                            static_cast<std::size_t>(h) * 3;
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(count));
  require(static_cast<std::size_t>(in.gcount()) == count, ErrorKind::ParseError,
          "truncated PPM pixel data in " + path.string());
  Image img(w, h);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = static_cast<double>(raw[i]) / 255.0;
  }
  return img;
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::IoError,
          "cannot write image file " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> raw(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  require(out.good(), ErrorKind::IoError,
          "failed writing image file " + path.string());
}

inline Image resize_bilinear(const Image& src, int out_w, int out_h) {
  require(out_w > 0 && out_h > 0, ErrorKind::ConfigError,
          "resize target must be positive");
  Image out(out_w, out_h);
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = src.at(x0, y0, ch) * (1.0 - wx) + src.at(x1, y0, ch) * wx;
        const double bot = src.at(x0, y1, ch) * (1.0 - wx) + src.at(x1, y1, ch) * wx;
        out.at(x, y, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

inline Image crop(const Image& src, int x0, int y0, int w, int h) {
  require(x0 >= 0 && y0 >= 0 && x0 + w <= src.width && y0 + h <= src.height,
          ErrorKind::ShapeError, "crop window outside the image");
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        out.at(x, y, ch) = src.at(x0 + x, y0 + y, ch);
      }
    }
  }
  return out;
}

// Separable Gaussian blur with reflected borders. sigma <= 0 is a no-op.
inline Image gaussian_blur(const Image& src, double sigma) {
  if (sigma <= 0.0) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return std::clamp(i, 0, n - 1);
  };

  Image tmp(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 src.at(reflect(x + k, src.width), y, ch);
        }
        tmp.at(x, y, ch) = acc;
      }
    }
  }
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 tmp.at(x, reflect(y + k, src.height), ch);
        }
        out.at(x, y, ch) = acc;
      }
    }
  }
  return out;
}

// Resize-then-crop preprocessing. Training mode draws the crop offset from
// the generator; evaluation mode uses the deterministic center crop.
struct PreprocessSpec {
  int resize_to = 512;
  int crop_to = 384;
};

template <typename RngT>
inline Image preprocess(const Image& raw, const PreprocessSpec& spec,
                        bool train_mode, RngT& rng) {
  require(raw.width > 0 && raw.height > 0 && !raw.pixels.empty(),
          ErrorKind::ShapeError, "empty image");
  require(spec.crop_to <= spec.resize_to, ErrorKind::ConfigError,
          "crop size exceeds resize size");
  const Image resized = resize_bilinear(raw, spec.resize_to, spec.resize_to);
  const int slack = spec.resize_to - spec.crop_to;
  int x0 = slack / 2;
  int y0 = slack / 2;
  if (train_mode && slack > 0) {
    x0 = rng.uniform_int(0, slack);
    y0 = rng.uniform_int(0, slack);
  }
  return crop(resized, x0, y0, spec.crop_to, spec.crop_to);
}

}  // namespace opiq
