// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>
#include <utility>

#include "sfda/error.hpp"
#include "sfda/harness/png_io.hpp"
#include "sfda/rng.hpp"

namespace sfda::harness {
namespace fs = std::filesystem;
namespace {

using Rgb = std::array<double, 3>;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
  const int sector = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

void rgb_to_hsv(const Rgb& c, double& h, double& s, double& v) {
  const double mx = std::max({c[0], c[1], c[2]});
  const double mn = std::min({c[0], c[1], c[2]});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
  } else if (mx == c[0]) {
    h = 60.0 * std::fmod((c[1] - c[2]) / d + 6.0, 6.0);
  } else if (mx == c[1]) {
    h = 60.0 * ((c[2] - c[0]) / d + 2.0);
  } else {
    h = 60.0 * ((c[0] - c[1]) / d + 4.0);
  }
}

// Two-part classes, spread out: pairs (i, i+s mod P) for decreasing stride s.
std::vector<std::pair<int, int>> part_pairs(int num_parts) {
  std::vector<std::pair<int, int>> out;
  std::set<std::pair<int, int>> seen;
  for (int stride = num_parts / 2; stride >= 1; --stride) {
    for (int i = 0; i < num_parts; ++i) {
      int a = i, b = (i + stride) % num_parts;
      if (a > b) std::swap(a, b);
      if (seen.insert({a, b}).second) out.emplace_back(a, b);
    }
  }
  return out;
}

double sample_bilinear(const Image& img, int c, double y, double x) {
  y = std::clamp(y, 0.0, img.height - 1.0);
  x = std::clamp(x, 0.0, img.width - 1.0);
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
         fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

Image gaussian_blur(const Image& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  Image tmp = img, out = img;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[i + radius] * img.at(c, y, std::clamp(x + i, 0, img.width - 1));
        }
        tmp.at(c, y, x) = acc;
      }
    }
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[i + radius] * tmp.at(c, std::clamp(y + i, 0, img.height - 1), x);
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (num_classes < 2 || images_per_class < 1 || image_size < 8 ||
      patches_per_image < 1 || patch_radius <= 0.0) {
    fail(ErrorKind::kInvalidConfiguration, "invalid synthetic task spec");
  }
  if (num_parts < 2 || num_parts > num_classes) {
    fail(ErrorKind::kInvalidConfiguration, "num_parts must be in [2, num_classes]");
  }
  if (num_classes - num_parts > static_cast<int>(part_pairs(num_parts).size())) {
    fail(ErrorKind::kInvalidConfiguration,
         "not enough part pairs for " + std::to_string(num_classes) + " classes");
  }
  if (shift.hue_degrees < 0 || shift.blur_sigma < 0 || shift.jitter_pixels < 0 ||
      shift.rotation_degrees < 0) {
    fail(ErrorKind::kInvalidConfiguration, "shift magnitudes must be non-negative");
  }
}

std::string synthetic_class_name(int class_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "class_%02d", class_index);
  return buf;
}

std::vector<int> class_parts(const SyntheticTaskSpec& spec, int class_index) {
  if (class_index < 0 || class_index >= spec.num_classes) {
    fail(ErrorKind::kInvalidConfiguration,
         "class index " + std::to_string(class_index) + " out of range");
  }
  if (class_index < spec.num_parts) return {class_index};
  const auto pairs = part_pairs(spec.num_parts);
  const auto& [a, b] = pairs.at(static_cast<std::size_t>(class_index - spec.num_parts));
  return {a, b};
}

Image render_source_image(const SyntheticTaskSpec& spec, int class_index,
                          int image_index, std::uint64_t seed) {
  const auto parts = class_parts(spec, class_index);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(class_index),
                             static_cast<std::uint64_t>(image_index)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = spec.image_size;
  Image img(3, n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double g = 0.08 + 0.04 * unit(rng);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = g;
    }
  }
  const double r = spec.patch_radius;
  for (int k = 0; k < spec.patches_per_image; ++k) {
    const int part = parts[static_cast<std::size_t>(k) % parts.size()];
    const double hue = 360.0 * part / spec.num_parts;
    const double theta = std::numbers::pi * part / spec.num_parts;
    const double period = 3.0 + (part % 3);
    const double cx = r + (n - 2 * r) * unit(rng);
    const double cy = r + (n - 2 * r) * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy > r * r) continue;
        const double along = dx * std::cos(theta) + dy * std::sin(theta);
        const double stripe =
            0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * along / period + phase);
        const Rgb rgb = hsv_to_rgb(hue, 0.85, 0.35 + 0.65 * stripe);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
      }
    }
  }
  quantize(img);
  return img;
}

Image apply_shift(const Image& image, const DomainShift& shift, std::uint64_t seed) {
  if (shift.is_zero()) return image;
  Rng rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  Image out = image;

  if (shift.jitter_pixels > 0.0 || shift.rotation_degrees > 0.0) {
    const double angle = shift.rotation_degrees * sym(rng) * std::numbers::pi / 180.0;
    const double tx = shift.jitter_pixels * sym(rng);
    const double ty = shift.jitter_pixels * sym(rng);
    const double cy = 0.5 * (image.height - 1), cx = 0.5 * (image.width - 1);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        // Inverse map output pixel to source coordinates.
        const double ox = x - cx - tx, oy = y - cy - ty;
        const double sx = ca * ox + sa * oy + cx;
        const double sy = -sa * ox + ca * oy + cy;
        for (int c = 0; c < image.channels; ++c) {
          out.at(c, y, x) = sample_bilinear(image, c, sy, sx);
        }
      }
    }
  }
  if (shift.hue_degrees > 0.0 && out.channels == 3) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        double h, s, v;
        rgb_to_hsv({out.at(0, y, x), out.at(1, y, x), out.at(2, y, x)}, h, s, v);
        const Rgb rgb = hsv_to_rgb(h + shift.hue_degrees, s, v);
        for (int c = 0; c < 3; ++c) out.at(c, y, x) = rgb[c];
      }
    }
  }
  if (shift.blur_sigma > 0.0) out = gaussian_blur(out, shift.blur_sigma);
  quantize(out);
  return out;
}

void generate_synthetic_task(const SyntheticTaskSpec& spec,
                             const std::vector<int>& source_classes,
                             const std::vector<int>& target_classes,
                             const fs::path& source_root, const fs::path& target_root,
                             std::uint64_t seed) {
  spec.validate();
  auto write_domain = [&](const std::vector<int>& classes, const fs::path& root,
                          bool shifted) {
    fs::remove_all(root);
    for (int c : classes) {
      const fs::path dir = root / synthetic_class_name(c);
      fs::create_directories(dir);
      for (int i = 0; i < spec.images_per_class; ++i) {
        Image img = render_source_image(spec, c, i, seed);
        if (shifted) {
          img = apply_shift(img, spec.shift,
                            derive_seed(seed, {0x5348, static_cast<std::uint64_t>(c),
                                               static_cast<std::uint64_t>(i)}));
        }
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.png", i);
        write_png(dir / name, img);
      }
    }
  };
  write_domain(source_classes, source_root, false);
  write_domain(target_classes, target_root, true);
}

}  // namespace sfda::harness
