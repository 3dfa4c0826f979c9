#pragma once

#include <cstddef>
#include <compare>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "wpkit/image.hpp"
#include "wpkit/wavelet.hpp"

namespace wpkit {

// Name of one sub-spectrogram: a string over {a,h,v,d}, outermost level
// first. "a" is the lowpass/lowpass child, "h" highpass along rows (axis 0)
// and lowpass along columns, "v" the transpose of "h", "d" highpass along
// both. Paths order lexicographically under a < h < v < d, which is also the
// order of index().
class RegionPath {
 public:
  explicit RegionPath(std::string path);

  static RegionPath lowest(int level);
  static RegionPath from_index(std::size_t index, int level);

  const std::string& str() const noexcept { return path_; }
  int level() const noexcept { return static_cast<int>(path_.size()); }
  // Base-4 number of the path, digits a=0 h=1 v=2 d=3, outermost first.
  std::size_t index() const noexcept;
  // Index of the length-(level-1) prefix; 0 for single-character paths.
  std::size_t parent_index() const noexcept;
  std::string parent() const { return path_.substr(0, path_.size() - 1); }
  bool is_lowest() const noexcept;

  friend bool operator==(const RegionPath&, const RegionPath&) = default;
  friend std::strong_ordering operator<=>(const RegionPath& a,
                                          const RegionPath& b) noexcept;

 private:
  std::string path_;
};

// All 4^level paths in index order.
std::vector<RegionPath> all_region_paths(int level);

// Square side x side x 3 window into a planar coefficient grid.
template <class T>
class BlockView {
 public:
  BlockView(T* grid, std::size_t grid_side, std::size_t row0, std::size_t col0,
            std::size_t side)
      : grid_(grid), grid_side_(grid_side), row0_(row0), col0_(col0), side_(side) {}

  std::size_t side() const noexcept { return side_; }
  std::size_t row0() const noexcept { return row0_; }
  std::size_t col0() const noexcept { return col0_; }
  std::size_t size() const noexcept { return side_ * side_ * kChannels; }

  T& at(std::size_t c, std::size_t y, std::size_t x) const {
    return grid_[(c * grid_side_ + row0_ + y) * grid_side_ + col0_ + x];
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t c = 0; c < kChannels; ++c)
      for (std::size_t y = 0; y < side_; ++y)
        for (std::size_t x = 0; x < side_; ++x) f(at(c, y, x));
  }

  void fill(double value) const
    requires(!std::is_const_v<T>)
  {
    for_each([value](T& v) { v = value; });
  }

  std::vector<double> to_vector() const {
    std::vector<double> out;
    out.reserve(size());
    for_each([&out](const T& v) { out.push_back(v); });
    return out;
  }

 private:
  T* grid_;
  std::size_t grid_side_;
  std::size_t row0_;
  std::size_t col0_;
  std::size_t side_;
};

using RegionView = BlockView<double>;
using ConstRegionView = BlockView<const double>;

// Full N-level wavelet packet layout of a padded M x M x 3 image. The grid is
// (M+2L) x (M+2L) per channel, planar, and each level splits every block into
// a|h over v|d quadrants.
class Spectrogram {
 public:
  // Zero-filled spectrogram. Throws Error("not-divisible") unless
  // (original_size + 2*pad) is divisible by 2^level.
  Spectrogram(int level, WaveletSpec wavelet, std::size_t original_size);
  // Adopts an existing coefficient grid; throws Error("layout-mismatch") if
  // its length is not 3*(M+2L)^2.
  Spectrogram(int level, WaveletSpec wavelet, std::size_t original_size,
              std::vector<double> coeffs);

  int level() const noexcept { return level_; }
  const WaveletSpec& wavelet() const noexcept { return wavelet_; }
  std::size_t original_size() const noexcept { return original_size_; }
  std::size_t grid_side() const noexcept { return grid_side_; }
  // Side of one sub-spectrogram, (M+2L)/2^N.
  std::size_t side() const noexcept { return grid_side_ >> level_; }
  std::size_t region_count() const noexcept { return std::size_t{1} << (2 * level_); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return coeffs_[(c * grid_side_ + y) * grid_side_ + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return coeffs_[(c * grid_side_ + y) * grid_side_ + x];
  }

  std::span<double> coeffs() noexcept { return coeffs_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }

  // Throws Error("bad-region-path") if the path length differs from level().
  RegionView region(const RegionPath& path);
  ConstRegionView region(const RegionPath& path) const;
  RegionView region(std::size_t index);
  ConstRegionView region(std::size_t index) const;

  // Same level, wavelet and size.
  bool compatible(const Spectrogram& other) const noexcept;

  // Re-checks the grid length against the declared geometry.
  void validate_layout() const;

 private:
  void region_origin(std::size_t index, std::size_t& row0, std::size_t& col0) const;

  int level_;
  WaveletSpec wavelet_;
  std::size_t original_size_;
  std::size_t grid_side_;
  std::vector<double> coeffs_;
};

// Mirror-reflects `pad` pixels onto every edge without repeating the edge
// pixel ([a b c] -> [b a b c b] for pad 1). Throws Error("pad-too-large")
// when pad >= min(height, width).
Image pad_image(const Image& img, int pad);

// Smallest pad >= min_pad with (size + 2*pad) divisible by 2^level.
int smallest_valid_pad(std::size_t size, int level, int min_pad = 1);

// Throws Error("not-divisible") naming smallest_valid_pad() when the padded
// size does not halve cleanly `level` times.
void check_geometry(std::size_t size, int level, int pad);

// N-level decomposition: reflect-pad by wavelet.pad, then run the separable
// periodized filter bank on every block at every level. Channels are
// independent. Throws Error("non-square") for non-square input.
Spectrogram wpd(const Image& img, int level, const WaveletSpec& wavelet);

// Inverse of wpd(): synthesis filter bank N times, then crop the pad border.
Image iwpd(const Spectrogram& spec);

// The two halves without the padding step. analyze_padded() takes an image
// that is already (M+2L) wide; synthesize_padded() returns the full
// (M+2L)-wide grid before cropping. They are exact inverses of each other,
// whereas wpd(iwpd(s)) re-reflects the border and so only returns s when s
// came from an image in the first place.
Spectrogram analyze_padded(const Image& padded, int level, const WaveletSpec& wavelet);
Image synthesize_padded(const Spectrogram& spec);

double squared_norm(std::span<const double> values);

}  // namespace wpkit
