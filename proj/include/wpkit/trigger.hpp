#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wpkit/image.hpp"
#include "wpkit/spectrogram.hpp"
#include "wpkit/wavelet.hpp"

namespace wpkit {

// How the average transformation pools a region. `pooled` (the default)
// averages over both spatial axes and all three channels and broadcasts one
// scalar; `per_channel` keeps one mean per channel for ablations.
enum class TriggerPooling { pooled, per_channel };

std::string to_string(TriggerPooling pooling);
TriggerPooling parse_pooling(const std::string& text);

// Replaces every coefficient of each region with that region's mean.
// Idempotent; never increases the squared norm.
Spectrogram average_transform(const Spectrogram& spec,
                              TriggerPooling pooling = TriggerPooling::pooled);

struct FrequencyTrigger {
  Spectrogram spec;
  TriggerPooling pooling = TriggerPooling::pooled;
  // Pooled mean (positions x channels) of each region's original
  // coefficients, indexed by RegionPath::index().
  std::vector<double> region_means;

  double mean(const RegionPath& path) const { return region_means.at(path.index()); }
  // SHA-256 of the little-endian f64 coefficient grid.
  std::string sha256() const;
};

// Resize to size x size (bilinear, skipped when already that size), pad,
// decompose and average. Throws Error("degenerate-trigger") for images with
// a side of one pixel or less.
FrequencyTrigger make_frequency_trigger(const Image& trigger_img, std::size_t size,
                                        int level, const WaveletSpec& wavelet,
                                        TriggerPooling pooling = TriggerPooling::pooled);

// JSON description at `json_path` plus the raw f64 grid next to it
// (`<json_path minus .json>.f64`). Loading verifies the grid hash.
void save_trigger(const FrequencyTrigger& trigger, const std::string& json_path);
FrequencyTrigger load_trigger(const std::string& json_path);

}  // namespace wpkit
