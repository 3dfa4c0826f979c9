#include "wpkit/wavelet.hpp"

#include "wpkit/error.hpp"

namespace wpkit {

namespace {

// Decomposition lowpass taps, same ordering as PyWavelets' dec_lo.
const std::vector<double>& lowpass_taps(WaveletName name) {
  static const std::vector<double> db2 = {
      -0.12940952255126037, 0.2241438680420134, 0.8365163037378079, 0.48296291314453416};
  static const std::vector<double> db3 = {
      0.03522629188570953, -0.08544127388202666, -0.13501102001025458,
      0.45987750211849154, 0.8068915093110925, 0.33267055295008263};
  static const std::vector<double> db4 = {
      -0.010597401785069032, 0.0328830116668852, 0.030841381835560764,
      -0.18703481171909309, -0.027983769416859854, 0.6308807679298589,
      0.7148465705529157, 0.2303778133088965};
  switch (name) {
    case WaveletName::db2:
      return db2;
    case WaveletName::db3:
      return db3;
    case WaveletName::db4:
      return db4;
  }
  throw Error("unknown-wavelet", "unhandled wavelet enumerator");
}

}  // namespace

std::string to_string(WaveletName name) {
  switch (name) {
    case WaveletName::db2:
      return "db2";
    case WaveletName::db3:
      return "db3";
    case WaveletName::db4:
      return "db4";
  }
  return "?";
}

WaveletName parse_wavelet_name(std::string_view text) {
  if (text == "db2") return WaveletName::db2;
  if (text == "db3") return WaveletName::db3;
  if (text == "db4") return WaveletName::db4;
  throw Error("unknown-wavelet",
              "unknown wavelet '" + std::string(text) + "' (expected db2, db3 or db4)");
}

WaveletSpec make_wavelet(WaveletName name, int pad) {
  if (pad < 1) {
    throw Error("invalid-pad", "wavelet pad must be >= 1, got " + std::to_string(pad));
  }
  WaveletSpec w;
  w.name = name;
  w.pad = pad;
  w.lowpass = lowpass_taps(name);
  // Quadrature mirror: g[k] = (-1)^(k+1) h[F-1-k].
  const std::size_t f = w.lowpass.size();
  w.highpass.resize(f);
  for (std::size_t k = 0; k < f; ++k) {
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    w.highpass[k] = sign * w.lowpass[f - 1 - k];
  }
  return w;
}

}  // namespace wpkit
