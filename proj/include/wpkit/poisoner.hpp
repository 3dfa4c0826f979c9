#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpkit/dataset.hpp"
#include "wpkit/freq_analysis.hpp"
#include "wpkit/image.hpp"
#include "wpkit/spectrogram.hpp"
#include "wpkit/trigger.hpp"

namespace wpkit {

// Binary keep-mask over the (M+2L) x (M+2L) x 3 coefficient grid: 0 inside
// every selected region, 1 elsewhere.
class PoisonMask {
 public:
  PoisonMask(RegionSelection regions, std::size_t size, int level, int pad);

  const RegionSelection& regions() const noexcept { return regions_; }
  std::span<const std::uint8_t> grid() const noexcept { return grid_; }
  std::size_t grid_side() const noexcept { return grid_side_; }
  std::size_t original_size() const noexcept { return size_; }
  int level() const noexcept { return level_; }
  int pad() const noexcept { return pad_; }
  std::size_t zeros() const noexcept;

  // Elementwise 1 - m.
  std::vector<std::uint8_t> complement() const;

  // Throws Error("shape-mismatch") unless spec shares this mask's geometry.
  void check_compatible(const Spectrogram& spec) const;

 private:
  RegionSelection regions_;
  std::size_t size_;
  int level_;
  int pad_;
  std::size_t grid_side_;
  std::vector<std::uint8_t> grid_;
};

// Throws Error("bad-region-path") when sel.level() != level.
PoisonMask build_mask(const RegionSelection& sel, std::size_t size, int level, int pad);

// W^-N( W^N(x) (.) m + k * trigger (.) (1 - m) ). Unclamped.
Image poison_train(const Image& x, const FrequencyTrigger& trigger, const PoisonMask& mask,
                   double k);

// W^-N( W^N(x) (.) m + (1 - m) (.) (alpha * W^N(x) + k_prime * trigger) ).
Image poison_test(const Image& x, const FrequencyTrigger& trigger, const PoisonMask& mask,
                  double k_prime, double alpha);

struct PoisonConfig {
  int level = 2;
  WaveletSpec wavelet = make_wavelet();
  RegionSelection regions{2, {}};
  double k = 6.0;
  double k_prime = 6.0;
  double alpha = 1.0;
  double ratio = 0.00004;
  int target_label = 0;
  std::uint64_t seed = 0;
  // When false, training samples keep alpha * original information inside
  // the poisoning regions (poison_test-style generation with k).
  bool mask_original = true;

  // Throws Error("invalid-config") for out-of-range hyperparameters.
  void validate() const;
  nlohmann::json to_json() const;
};

// max(1, round_half_up(ratio * n)); `clamped` reports the max(1, .) case.
std::size_t poison_count(double ratio, std::size_t n, bool* clamped = nullptr);

// `count` distinct indices with labels[i] != target, uniform at random from
// a seeded mt19937_64, returned ascending. Throws Error("insufficient-samples").
std::vector<std::size_t> select_poison_indices(std::span<const int> labels, int target,
                                               std::size_t count, std::uint64_t seed);

struct PoisonManifest {
  nlohmann::json config;
  std::size_t n_samples = 0;
  std::vector<std::size_t> poisoned_indices;
  std::vector<int> original_labels;
  int target_label = 0;
  std::string trigger_sha256;
  std::string dataset_sha256;

  nlohmann::json to_json() const;
  static PoisonManifest from_json(const nlohmann::json& doc);
};

struct PoisonResult {
  LabeledDataset dataset;
  PoisonManifest manifest;
  std::vector<std::string> warnings;
};

// Replaces a seeded random subset of non-target samples with poisoned copies
// labeled cfg.target_label. Other samples pass through untouched, and the
// output order matches the input order for any `jobs`.
PoisonResult poison_dataset(const LabeledDataset& ds, const PoisonConfig& cfg,
                            const FrequencyTrigger& trigger, unsigned jobs = 1);

// Poisoned copy of a test split: every non-target sample goes through
// poison_test() and keeps its original label; target-class samples are
// dropped. The manifest's poisoned_indices refer to the input split.
PoisonResult poison_test_set(const LabeledDataset& ds, const PoisonConfig& cfg,
                             const FrequencyTrigger& trigger, unsigned jobs = 1);

}  // namespace wpkit
