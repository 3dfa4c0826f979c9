#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wpkit/image.hpp"
#include "wpkit/spectrogram.hpp"
#include "wpkit/wavelet.hpp"

namespace wpkit {

// absolute_average: |mean(C)|. average_absolute: mean(|C|).
enum class Aggregation { absolute_average, average_absolute };

// "absavg" / "avgabs"
std::string to_string(Aggregation mode);
Aggregation parse_aggregation(std::string_view text);

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value) noexcept;
  void merge(const CompensatedSum& other) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Aggregates one coefficient block on its own, e.g. the toy vector
// [-3, 4, -2, 5] gives 1.0 (absolute_average) and 3.5 (average_absolute).
double aggregate_block(std::span<const double> coeffs, Aggregation mode);

struct EffectivenessMap {
  int level = 0;
  WaveletName wavelet = WaveletName::db3;
  int pad = 0;
  Aggregation mode = Aggregation::absolute_average;
  std::size_t n_samples = 0;
  // One E per region, indexed by RegionPath::index().
  std::vector<double> values;

  double at(const RegionPath& path) const { return values.at(path.index()); }
};

// Streaming per-region accumulator. Feeding spectrograms in any order and
// merging partial accumulators gives the same map up to rounding.
class EffectivenessAccumulator {
 public:
  EffectivenessAccumulator(int level, WaveletSpec wavelet, Aggregation mode);

  // Throws Error("size-mismatch") if spec differs in geometry.
  void add(const Spectrogram& spec);
  void merge(const EffectivenessAccumulator& other);
  std::size_t count() const noexcept { return count_; }
  // Throws Error("empty-dataset") if nothing was added.
  EffectivenessMap finish() const;

 private:
  int level_;
  WaveletSpec wavelet_;
  Aggregation mode_;
  std::size_t count_ = 0;
  std::size_t original_size_ = 0;
  std::vector<CompensatedSum> sums_;
};

// One pass over the dataset. Throws Error("empty-dataset") for an empty
// input and Error("size-mismatch") naming the first image whose size differs
// from image 0. `jobs` = 0 uses every hardware thread; the result does not
// depend on the job count.
EffectivenessMap effectiveness(std::span<const Image> dataset, int level,
                               const WaveletSpec& wavelet, Aggregation mode,
                               unsigned jobs = 1);

// A set of regions at one level, kept sorted (a < h < v < d) and unique.
class RegionSelection {
 public:
  RegionSelection(int level, std::vector<RegionPath> regions);

  // Parses "ah,ha,va,dh"; an empty string gives an empty selection.
  static RegionSelection parse(int level, std::string_view csv);

  int level() const noexcept { return level_; }
  const std::vector<RegionPath>& regions() const noexcept { return regions_; }
  std::size_t size() const noexcept { return regions_.size(); }
  bool empty() const noexcept { return regions_.empty(); }
  bool contains(const RegionPath& path) const;
  std::string to_csv() const;

  // True when the set has one region per parent and omits "a"^N, i.e. it
  // has the shape produced by select_key_regions().
  bool is_key_selection() const;

  friend bool operator==(const RegionSelection&, const RegionSelection&) = default;

 private:
  int level_;
  std::vector<RegionPath> regions_;
};

// Per parent-spectrogram, the child with the largest E. "a"^N never
// competes; ties go to the earlier child in a < h < v < d order.
RegionSelection select_key_regions(const EffectivenessMap& e);

struct AggregationComparison {
  EffectivenessMap absolute_average;
  EffectivenessMap average_absolute;
  RegionSelection absolute_average_selection;
  RegionSelection average_absolute_selection;
  // average_absolute E minus absolute_average E, per region index.
  std::vector<double> deltas;
};

AggregationComparison compare_aggregations(std::span<const Image> dataset, int level,
                                           const WaveletSpec& wavelet,
                                           unsigned jobs = 1);

// {level, wavelet, pad, mode, n_samples, regions: {path: E}, selected: [...]}
nlohmann::json analysis_to_json(const EffectivenessMap& e, const RegionSelection& sel);
nlohmann::json comparison_to_json(const AggregationComparison& cmp);

// Reads the "selected" list (and "level") back from an analysis document.
RegionSelection selection_from_json(const nlohmann::json& doc);

}  // namespace wpkit
