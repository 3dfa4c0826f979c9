#include "wpkit/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wpkit/error.hpp"

namespace wpkit {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(kChannels * height * width, fill) {}

void Image::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error("non-finite",
                  "image contains a non-finite value at flat index " +
                      std::to_string(i));
    }
  }
}

Image Image::from_planar_bytes(std::span<const std::uint8_t> bytes,
                               std::size_t height, std::size_t width) {
  if (bytes.size() != kChannels * height * width) {
    throw Error("shape-mismatch", "planar byte buffer has " +
                                      std::to_string(bytes.size()) +
                                      " bytes, expected " +
                                      std::to_string(kChannels * height * width));
  }
  Image img(height, width);
  std::transform(bytes.begin(), bytes.end(), img.data_.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  return img;
}

Image Image::from_interleaved_bytes(std::span<const std::uint8_t> bytes,
                                    std::size_t height, std::size_t width) {
  if (bytes.size() != kChannels * height * width) {
    throw Error("shape-mismatch", "interleaved byte buffer has " +
                                      std::to_string(bytes.size()) +
                                      " bytes, expected " +
                                      std::to_string(kChannels * height * width));
  }
  Image img(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        img.at(c, y, x) = bytes[(y * width + x) * kChannels + c] / 255.0;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> Image::to_interleaved_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double v = std::clamp(at(c, y, x), 0.0, 1.0);
        out[(y * width_ + x) * kChannels + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return out;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw Error("shape-mismatch", "cannot compare images of different shapes");
  }
  double worst = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    worst = std::max(worst, std::abs(da[i] - db[i]));
  }
  return worst;
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<Tap> linear_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (img.height() == height && img.width() == width) return img;
  if (img.empty() || height == 0 || width == 0) {
    throw Error("degenerate-image", "cannot resize an empty image");
  }
  const auto ty = linear_taps(img.height(), height);
  const auto tx = linear_taps(img.width(), width);
  Image out(height, width);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double top = img.at(c, ty[y].lo, tx[x].lo) * (1.0 - tx[x].frac) +
                           img.at(c, ty[y].lo, tx[x].hi) * tx[x].frac;
        const double bottom =
            img.at(c, ty[y].hi, tx[x].lo) * (1.0 - tx[x].frac) +
            img.at(c, ty[y].hi, tx[x].hi) * tx[x].frac;
        out.at(c, y, x) = top * (1.0 - ty[y].frac) + bottom * ty[y].frac;
      }
    }
  }
  return out;
}

}  // namespace wpkit
