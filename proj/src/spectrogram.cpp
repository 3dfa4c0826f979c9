#include "wpkit/spectrogram.hpp"

#include <algorithm>
#include <string>

#include "wpkit/error.hpp"

namespace wpkit {

namespace {

constexpr char kAlphabet[4] = {'a', 'h', 'v', 'd'};

int digit_of(char ch) {
  switch (ch) {
    case 'a':
      return 0;
    case 'h':
      return 1;
    case 'v':
      return 2;
    case 'd':
      return 3;
    default:
      return -1;
  }
}

std::size_t padded_side(std::size_t size, int pad) {
  return size + 2 * static_cast<std::size_t>(pad);
}

// One level of the periodized analysis bank on a strided 1D signal of even
// length n: lo[o] = sum_j h[j] x[(F/2 + 2o - j) mod n], same for hi with g.
// This is the alignment PyWavelets uses for mode="periodization".
void analyze_1d(const double* in, std::size_t in_stride, std::size_t n,
                const WaveletSpec& w, double* lo, double* hi,
                std::size_t out_stride) {
  const std::size_t f = w.taps();
  const std::size_t half = n / 2;
  for (std::size_t o = 0; o < half; ++o) {
    double sum_lo = 0.0;
    double sum_hi = 0.0;
    // (f/2 + 2o - j) mod n, kept non-negative by adding a multiple of n.
    const std::size_t base = f / 2 + 2 * o + n * (f / n + 1);
    for (std::size_t j = 0; j < f; ++j) {
      const double v = in[((base - j) % n) * in_stride];
      sum_lo += w.lowpass[j] * v;
      sum_hi += w.highpass[j] * v;
    }
    lo[o * out_stride] = sum_lo;
    hi[o * out_stride] = sum_hi;
  }
}

// Adjoint of analyze_1d; equals its inverse because the periodized bank is
// orthogonal. `out` must be zeroed by the caller.
void synthesize_1d(const double* lo, const double* hi, std::size_t in_stride,
                   std::size_t n, const WaveletSpec& w, double* out,
                   std::size_t out_stride) {
  const std::size_t f = w.taps();
  const std::size_t half = n / 2;
  for (std::size_t o = 0; o < half; ++o) {
    const double a = lo[o * in_stride];
    const double d = hi[o * in_stride];
    const std::size_t base = f / 2 + 2 * o + n * (f / n + 1);
    for (std::size_t j = 0; j < f; ++j) {
      out[((base - j) % n) * out_stride] += w.lowpass[j] * a + w.highpass[j] * d;
    }
  }
}

// Single-level 2D analysis of the b x b block at (row0, col0) of one plane.
// Row pass splits columns into lo|hi halves, column pass splits rows; the
// quadrants are then arranged a|h over v|d where h = highpass along axis 0.
void analyze_block(double* plane, std::size_t stride, std::size_t row0,
                   std::size_t col0, std::size_t b, const WaveletSpec& w,
                   std::vector<double>& scratch) {
  const std::size_t half = b / 2;
  scratch.assign(2 * b * b, 0.0);
  double* rows = scratch.data();          // b x b: [lo1 | hi1] per row
  double* cols = scratch.data() + b * b;  // b x b: axis-0 split of `rows`
  for (std::size_t y = 0; y < b; ++y) {
    const double* src = plane + (row0 + y) * stride + col0;
    analyze_1d(src, 1, b, w, rows + y * b, rows + y * b + half, 1);
  }
  for (std::size_t x = 0; x < b; ++x) {
    analyze_1d(rows + x, b, b, w, cols + x, cols + half * b + x, b);
  }
  // cols quadrants: [0,half)x[0,half) = lo0 lo1 (a), [half,b)x[0,half) =
  // hi0 lo1 (h), [0,half)x[half,b) = lo0 hi1 (v), [half,b)x[half,b) = d.
  for (std::size_t y = 0; y < half; ++y) {
    double* top = plane + (row0 + y) * stride + col0;
    double* bottom = plane + (row0 + half + y) * stride + col0;
    for (std::size_t x = 0; x < half; ++x) {
      top[x] = cols[y * b + x];                         // a
      top[half + x] = cols[(half + y) * b + x];         // h
      bottom[x] = cols[y * b + half + x];               // v
      bottom[half + x] = cols[(half + y) * b + half + x];  // d
    }
  }
}

void synthesize_block(double* plane, std::size_t stride, std::size_t row0,
                      std::size_t col0, std::size_t b, const WaveletSpec& w,
                      std::vector<double>& scratch) {
  const std::size_t half = b / 2;
  scratch.assign(2 * b * b, 0.0);
  double* cols = scratch.data();
  double* rows = scratch.data() + b * b;
  for (std::size_t y = 0; y < half; ++y) {
    const double* top = plane + (row0 + y) * stride + col0;
    const double* bottom = plane + (row0 + half + y) * stride + col0;
    for (std::size_t x = 0; x < half; ++x) {
      cols[y * b + x] = top[x];
      cols[(half + y) * b + x] = top[half + x];
      cols[y * b + half + x] = bottom[x];
      cols[(half + y) * b + half + x] = bottom[half + x];
    }
  }
  for (std::size_t x = 0; x < b; ++x) {
    synthesize_1d(cols + x, cols + half * b + x, b, b, w, rows + x, b);
  }
  for (std::size_t y = 0; y < b; ++y) {
    double* dst = plane + (row0 + y) * stride + col0;
    std::fill(dst, dst + b, 0.0);
    synthesize_1d(rows + y * b, rows + y * b + half, 1, b, w, dst, 1);
  }
}

std::size_t reflect_index(long long i, long long n) {
  // Mirror without repeating the edge sample; valid for |overhang| < n.
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

RegionPath::RegionPath(std::string path) : path_(std::move(path)) {
  if (path_.empty()) {
    throw Error("bad-region-path", "region path must not be empty");
  }
  for (char ch : path_) {
    if (digit_of(ch) < 0) {
      throw Error("bad-region-path", "region path '" + path_ +
                                         "' contains a character outside {a,h,v,d}");
    }
  }
}

RegionPath RegionPath::lowest(int level) {
  if (level < 1) throw Error("bad-level", "level must be >= 1");
  return RegionPath(std::string(static_cast<std::size_t>(level), 'a'));
}

RegionPath RegionPath::from_index(std::size_t index, int level) {
  if (level < 1) throw Error("bad-level", "level must be >= 1");
  std::string s(static_cast<std::size_t>(level), 'a');
  for (int i = level - 1; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kAlphabet[index % 4];
    index /= 4;
  }
  if (index != 0) throw Error("bad-region-path", "region index out of range");
  return RegionPath(std::move(s));
}

std::size_t RegionPath::index() const noexcept {
  std::size_t idx = 0;
  for (char ch : path_) idx = idx * 4 + static_cast<std::size_t>(digit_of(ch));
  return idx;
}

std::size_t RegionPath::parent_index() const noexcept { return index() / 4; }

bool RegionPath::is_lowest() const noexcept {
  return std::all_of(path_.begin(), path_.end(), [](char c) { return c == 'a'; });
}

std::strong_ordering operator<=>(const RegionPath& a, const RegionPath& b) noexcept {
  const std::size_t n = std::min(a.path_.size(), b.path_.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int da = digit_of(a.path_[i]);
    const int db = digit_of(b.path_[i]);
    if (da != db) return da <=> db;
  }
  return a.path_.size() <=> b.path_.size();
}

std::vector<RegionPath> all_region_paths(int level) {
  std::vector<RegionPath> out;
  const std::size_t n = std::size_t{1} << (2 * level);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(RegionPath::from_index(i, level));
  return out;
}

Spectrogram::Spectrogram(int level, WaveletSpec wavelet, std::size_t original_size)
    : level_(level),
      wavelet_(std::move(wavelet)),
      original_size_(original_size),
      grid_side_(padded_side(original_size, wavelet_.pad)) {
  if (level < 1) throw Error("bad-level", "level must be >= 1");
  check_geometry(original_size, level, wavelet_.pad);
  coeffs_.assign(kChannels * grid_side_ * grid_side_, 0.0);
}

Spectrogram::Spectrogram(int level, WaveletSpec wavelet, std::size_t original_size,
                         std::vector<double> coeffs)
    : Spectrogram(level, std::move(wavelet), original_size) {
  if (coeffs.size() != coeffs_.size()) {
    throw Error("layout-mismatch",
                "coefficient grid has " + std::to_string(coeffs.size()) +
                    " values, expected " + std::to_string(coeffs_.size()));
  }
  coeffs_ = std::move(coeffs);
}

void Spectrogram::validate_layout() const {
  const std::size_t expected = kChannels * grid_side_ * grid_side_;
  if (coeffs_.size() != expected || (grid_side_ >> level_) << level_ != grid_side_ ||
      side() == 0) {
    throw Error("layout-mismatch", "spectrogram grid does not match its geometry");
  }
}

void Spectrogram::region_origin(std::size_t index, std::size_t& row0,
                                std::size_t& col0) const {
  if (index >= region_count()) {
    throw Error("bad-region-path", "region index " + std::to_string(index) +
                                       " out of range for level " +
                                       std::to_string(level_));
  }
  row0 = 0;
  col0 = 0;
  std::size_t block = grid_side_;
  for (int i = level_ - 1; i >= 0; --i) {
    const std::size_t digit = (index >> (2 * i)) & 3u;
    block /= 2;
    if (digit == 1 || digit == 3) col0 += block;  // h, d: right half
    if (digit == 2 || digit == 3) row0 += block;  // v, d: bottom half
  }
}

RegionView Spectrogram::region(const RegionPath& path) {
  if (path.level() != level_) {
    throw Error("bad-region-path", "region path '" + path.str() + "' has length " +
                                       std::to_string(path.level()) +
                                       " but the spectrogram has level " +
                                       std::to_string(level_));
  }
  return region(path.index());
}

ConstRegionView Spectrogram::region(const RegionPath& path) const {
  if (path.level() != level_) {
    throw Error("bad-region-path", "region path '" + path.str() + "' has length " +
                                       std::to_string(path.level()) +
                                       " but the spectrogram has level " +
                                       std::to_string(level_));
  }
  return region(path.index());
}

RegionView Spectrogram::region(std::size_t index) {
  std::size_t r = 0;
  std::size_t c = 0;
  region_origin(index, r, c);
  return RegionView(coeffs_.data(), grid_side_, r, c, side());
}

ConstRegionView Spectrogram::region(std::size_t index) const {
  std::size_t r = 0;
  std::size_t c = 0;
  region_origin(index, r, c);
  return ConstRegionView(coeffs_.data(), grid_side_, r, c, side());
}

bool Spectrogram::compatible(const Spectrogram& other) const noexcept {
  return level_ == other.level_ && original_size_ == other.original_size_ &&
         grid_side_ == other.grid_side_ && wavelet_.name == other.wavelet_.name &&
         wavelet_.pad == other.wavelet_.pad;
}

Image pad_image(const Image& img, int pad) {
  if (pad < 0) throw Error("invalid-pad", "pad must be >= 0");
  if (pad == 0) return img;
  const auto p = static_cast<std::size_t>(pad);
  if (p >= std::min(img.height(), img.width())) {
    throw Error("pad-too-large", "cannot reflect " + std::to_string(pad) +
                                     " pixels onto a " + std::to_string(img.height()) +
                                     "x" + std::to_string(img.width()) + " image");
  }
  const auto h = static_cast<long long>(img.height());
  const auto w = static_cast<long long>(img.width());
  Image out(img.height() + 2 * p, img.width() + 2 * p);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      const std::size_t sy = reflect_index(static_cast<long long>(y) - pad, h);
      for (std::size_t x = 0; x < out.width(); ++x) {
        const std::size_t sx = reflect_index(static_cast<long long>(x) - pad, w);
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  return out;
}

int smallest_valid_pad(std::size_t size, int level, int min_pad) {
  const std::size_t step = std::size_t{1} << level;
  int pad = std::max(min_pad, 0);
  while (padded_side(size, pad) % step != 0) ++pad;
  return pad;
}

void check_geometry(std::size_t size, int level, int pad) {
  if (level < 1 || level > 16) {
    throw Error("bad-level", "level must be in [1, 16], got " + std::to_string(level));
  }
  const std::size_t side = padded_side(size, pad);
  const std::size_t step = std::size_t{1} << level;
  if (side % step != 0 || side < step) {
    throw Error("not-divisible",
                "padded size " + std::to_string(size) + "+2*" + std::to_string(pad) +
                    "=" + std::to_string(side) + " is not divisible by 2^" +
                    std::to_string(level) + "; smallest valid pad is " +
                    std::to_string(smallest_valid_pad(size, level, 1)));
  }
}

Spectrogram analyze_padded(const Image& padded, int level, const WaveletSpec& wavelet) {
  if (padded.height() != padded.width()) {
    throw Error("non-square", "wavelet packet decomposition needs a square image, got " +
                                  std::to_string(padded.height()) + "x" +
                                  std::to_string(padded.width()));
  }
  const auto border = 2 * static_cast<std::size_t>(wavelet.pad);
  if (padded.height() <= border) {
    throw Error("pad-too-large", "padded image of side " + std::to_string(padded.height()) +
                                     " is not larger than twice the pad");
  }
  Spectrogram spec(level, wavelet, padded.height() - border,
                   std::vector<double>(padded.data().begin(), padded.data().end()));

  const std::size_t side = spec.grid_side();
  std::vector<double> scratch;
  for (std::size_t c = 0; c < kChannels; ++c) {
    double* plane = spec.coeffs().data() + c * side * side;
    for (int l = 0; l < level; ++l) {
      const std::size_t b = side >> l;
      for (std::size_t r0 = 0; r0 < side; r0 += b) {
        for (std::size_t c0 = 0; c0 < side; c0 += b) {
          analyze_block(plane, side, r0, c0, b, wavelet, scratch);
        }
      }
    }
  }
  return spec;
}

Spectrogram wpd(const Image& img, int level, const WaveletSpec& wavelet) {
  if (img.height() != img.width()) {
    throw Error("non-square", "wavelet packet decomposition needs a square image, got " +
                                  std::to_string(img.height()) + "x" +
                                  std::to_string(img.width()));
  }
  check_geometry(img.height(), level, wavelet.pad);
  return analyze_padded(pad_image(img, wavelet.pad), level, wavelet);
}

Image synthesize_padded(const Spectrogram& spec) {
  spec.validate_layout();
  const std::size_t side = spec.grid_side();
  Image out(side, side);
  std::copy(spec.coeffs().begin(), spec.coeffs().end(), out.data().begin());
  std::vector<double> scratch;
  for (std::size_t c = 0; c < kChannels; ++c) {
    double* plane = out.data().data() + c * side * side;
    for (int l = spec.level() - 1; l >= 0; --l) {
      const std::size_t b = side >> l;
      for (std::size_t r0 = 0; r0 < side; r0 += b) {
        for (std::size_t c0 = 0; c0 < side; c0 += b) {
          synthesize_block(plane, side, r0, c0, b, spec.wavelet(), scratch);
        }
      }
    }
  }
  return out;
}

Image iwpd(const Spectrogram& spec) {
  const Image grid = synthesize_padded(spec);
  const std::size_t m = spec.original_size();
  const auto pad = static_cast<std::size_t>(spec.wavelet().pad);
  Image out(m, m);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t y = 0; y < m; ++y) {
      for (std::size_t x = 0; x < m; ++x) {
        out.at(c, y, x) = grid.at(c, y + pad, x + pad);
      }
    }
  }
  return out;
}

double squared_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return sum;
}

}  // namespace wpkit
