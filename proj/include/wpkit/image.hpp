#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wpkit {

inline constexpr std::size_t kChannels = 3;

// RGB raster of doubles stored planar: plane c occupies
// data[c*H*W, (c+1)*H*W), row-major inside the plane. Pixel values are
// nominally in [0,1] but nothing here enforces it; poisoned images may leave
// that range until they are exported to 8 bits.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return kChannels; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<double> plane(std::size_t c) {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<const double> plane(std::size_t c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Throws Error("non-finite") if any value is NaN or infinite.
  void validate() const;

  // 8-bit planar (CHW) bytes, value/255. Length must be 3*height*width.
  static Image from_planar_bytes(std::span<const std::uint8_t> bytes,
                                 std::size_t height, std::size_t width);

  // 8-bit interleaved RGB (HWC) bytes, value/255.
  static Image from_interleaved_bytes(std::span<const std::uint8_t> bytes,
                                      std::size_t height, std::size_t width);

  // Clamps to [0,1] and rounds to the nearest byte; interleaved RGB output.
  std::vector<std::uint8_t> to_interleaved_bytes() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

double max_abs_diff(const Image& a, const Image& b);

// Bilinear resampling with half-pixel centers (the same sampling grid as
// OpenCV's INTER_LINEAR). Returns a copy when the size already matches.
Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);

}  // namespace wpkit
