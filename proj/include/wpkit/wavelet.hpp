#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wpkit {

enum class WaveletName { db2, db3, db4 };

std::string to_string(WaveletName name);
// Accepts "db2", "db3", "db4"; throws Error("unknown-wavelet") otherwise.
WaveletName parse_wavelet_name(std::string_view text);

// Orthonormal Daubechies analysis filter pair plus the number of pixels
// reflected onto every image edge before decomposition.
struct WaveletSpec {
  WaveletName name = WaveletName::db3;
  std::vector<double> lowpass;
  std::vector<double> highpass;
  int pad = 2;

  std::size_t taps() const noexcept { return lowpass.size(); }
};

// Builds the filter pair for `name`. pad must be >= 1.
WaveletSpec make_wavelet(WaveletName name = WaveletName::db3, int pad = 2);

}  // namespace wpkit
