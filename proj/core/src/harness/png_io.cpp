// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sfda/error.hpp"

namespace sfda::harness {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorKind::kData, "cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    fail(ErrorKind::kData, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  const int h = static_cast<int>(png.height), w = static_cast<int>(png.width);
  Image img(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
      }
    }
  }
  return img;
}

void write_rgb_png(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    fail(ErrorKind::kData, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) {
    fail(ErrorKind::kInvalidInput, "only 3-channel images can be written as PNG");
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(image.height) * image.width * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        rgb[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] =
            to_byte(image.at(c, y, x));
      }
    }
  }
  write_rgb_png(path, image.width, image.height, rgb);
}

void quantize(Image& image) {
  for (double& v : image.pixels) v = to_byte(v) / 255.0;
}

}  // namespace sfda::harness
