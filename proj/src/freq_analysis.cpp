#include "wpkit/freq_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "wpkit/error.hpp"
#include "wpkit/parallel.hpp"

namespace wpkit {

namespace {

constexpr std::size_t kChunk = 64;

}  // namespace

std::string to_string(Aggregation mode) {
  return mode == Aggregation::absolute_average ? "absavg" : "avgabs";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "absavg" || text == "absolute_average") return Aggregation::absolute_average;
  if (text == "avgabs" || text == "average_absolute") return Aggregation::average_absolute;
  throw Error("unknown-mode",
              "unknown aggregation '" + std::string(text) + "' (expected absavg or avgabs)");
}

void CompensatedSum::add(double value) noexcept {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

void CompensatedSum::merge(const CompensatedSum& other) noexcept {
  add(other.sum_);
  add(other.compensation_);
}

double aggregate_block(std::span<const double> coeffs, Aggregation mode) {
  if (coeffs.empty()) throw Error("empty-dataset", "cannot aggregate an empty block");
  CompensatedSum sum;
  for (double c : coeffs) {
    sum.add(mode == Aggregation::absolute_average ? c : std::abs(c));
  }
  return std::abs(sum.value() / static_cast<double>(coeffs.size()));
}

EffectivenessAccumulator::EffectivenessAccumulator(int level, WaveletSpec wavelet,
                                                   Aggregation mode)
    : level_(level),
      wavelet_(std::move(wavelet)),
      mode_(mode),
      sums_(std::size_t{1} << (2 * level)) {}

void EffectivenessAccumulator::add(const Spectrogram& spec) {
  if (spec.level() != level_ || spec.wavelet().name != wavelet_.name ||
      spec.wavelet().pad != wavelet_.pad) {
    throw Error("size-mismatch", "spectrogram level/wavelet differs from the accumulator");
  }
  if (count_ == 0) {
    original_size_ = spec.original_size();
  } else if (spec.original_size() != original_size_) {
    throw Error("size-mismatch", "spectrogram of size " +
                                     std::to_string(spec.original_size()) +
                                     " added to an accumulator of size " +
                                     std::to_string(original_size_));
  }
  const bool raw = mode_ == Aggregation::absolute_average;
  for (std::size_t r = 0; r < sums_.size(); ++r) {
    CompensatedSum& sum = sums_[r];
    spec.region(r).for_each([&](double c) { sum.add(raw ? c : std::abs(c)); });
  }
  ++count_;
}

void EffectivenessAccumulator::merge(const EffectivenessAccumulator& other) {
  if (other.count_ == 0) return;
  if (other.level_ != level_ || other.mode_ != mode_ ||
      (count_ != 0 && other.original_size_ != original_size_)) {
    throw Error("size-mismatch", "cannot merge incompatible accumulators");
  }
  if (count_ == 0) original_size_ = other.original_size_;
  for (std::size_t r = 0; r < sums_.size(); ++r) sums_[r].merge(other.sums_[r]);
  count_ += other.count_;
}

EffectivenessMap EffectivenessAccumulator::finish() const {
  if (count_ == 0) throw Error("empty-dataset", "no samples were aggregated");
  const std::size_t side = (original_size_ + 2 * static_cast<std::size_t>(wavelet_.pad)) >> level_;
  const double per_sample = static_cast<double>(side * side * kChannels);
  EffectivenessMap out;
  out.level = level_;
  out.wavelet = wavelet_.name;
  out.pad = wavelet_.pad;
  out.mode = mode_;
  out.n_samples = count_;
  out.values.reserve(sums_.size());
  for (const auto& s : sums_) {
    out.values.push_back(std::abs(s.value() / (per_sample * static_cast<double>(count_))));
  }
  return out;
}

EffectivenessMap effectiveness(std::span<const Image> dataset, int level,
                               const WaveletSpec& wavelet, Aggregation mode,
                               unsigned jobs) {
  if (dataset.empty()) throw Error("empty-dataset", "effectiveness needs at least one image");
  for (std::size_t i = 1; i < dataset.size(); ++i) {
    if (!dataset[i].same_shape(dataset[0])) {
      throw Error("size-mismatch",
                  "sample " + std::to_string(i) + " is " +
                      std::to_string(dataset[i].height()) + "x" +
                      std::to_string(dataset[i].width()) + " but sample 0 is " +
                      std::to_string(dataset[0].height()) + "x" +
                      std::to_string(dataset[0].width()));
    }
  }
  // Fixed chunking keeps the reduction order independent of `jobs`.
  const std::size_t chunks = (dataset.size() + kChunk - 1) / kChunk;
  std::vector<EffectivenessAccumulator> partial(
      chunks, EffectivenessAccumulator(level, wavelet, mode));
  parallel_for(chunks, jobs, [&](std::size_t chunk) {
    const std::size_t end = std::min(dataset.size(), (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      partial[chunk].add(wpd(dataset[i], level, wavelet));
    }
  });
  EffectivenessAccumulator total(level, wavelet, mode);
  for (const auto& p : partial) total.merge(p);
  return total.finish();
}

RegionSelection::RegionSelection(int level, std::vector<RegionPath> regions)
    : level_(level), regions_(std::move(regions)) {
  if (level < 1) throw Error("bad-level", "selection level must be >= 1");
  for (const auto& r : regions_) {
    if (r.level() != level) {
      throw Error("bad-region-path", "region '" + r.str() + "' does not have level " +
                                         std::to_string(level));
    }
  }
  std::sort(regions_.begin(), regions_.end());
  regions_.erase(std::unique(regions_.begin(), regions_.end()), regions_.end());
}

RegionSelection RegionSelection::parse(int level, std::string_view csv) {
  std::vector<RegionPath> paths;
  std::size_t start = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string token(csv.substr(start, end - start));
    token.erase(std::remove_if(token.begin(), token.end(),
                               [](unsigned char c) { return std::isspace(c); }),
                token.end());
    if (!token.empty()) paths.emplace_back(std::move(token));
    start = end + 1;
  }
  return RegionSelection(level, std::move(paths));
}

bool RegionSelection::contains(const RegionPath& path) const {
  return std::binary_search(regions_.begin(), regions_.end(), path);
}

std::string RegionSelection::to_csv() const {
  std::string out;
  for (const auto& r : regions_) {
    if (!out.empty()) out += ',';
    out += r.str();
  }
  return out;
}

bool RegionSelection::is_key_selection() const {
  const std::size_t parents = std::size_t{1} << (2 * (level_ - 1));
  if (regions_.size() != parents) return false;
  std::vector<bool> seen(parents, false);
  for (const auto& r : regions_) {
    if (r.is_lowest() || seen[r.parent_index()]) return false;
    seen[r.parent_index()] = true;
  }
  return true;
}

RegionSelection select_key_regions(const EffectivenessMap& e) {
  const std::size_t regions = std::size_t{1} << (2 * e.level);
  if (e.level < 1 || e.values.size() != regions) {
    throw Error("malformed-effectiveness", "effectiveness map has " +
                                               std::to_string(e.values.size()) +
                                               " entries, expected " +
                                               std::to_string(regions));
  }
  std::vector<RegionPath> chosen;
  for (std::size_t parent = 0; parent < regions / 4; ++parent) {
    std::size_t best = regions;
    for (std::size_t child = 4 * parent; child < 4 * parent + 4; ++child) {
      if (child == 0) continue;  // "a"^N
      if (best == regions || e.values[child] > e.values[best]) best = child;
    }
    chosen.push_back(RegionPath::from_index(best, e.level));
  }
  return RegionSelection(e.level, std::move(chosen));
}

AggregationComparison compare_aggregations(std::span<const Image> dataset, int level,
                                           const WaveletSpec& wavelet, unsigned jobs) {
  auto absavg = effectiveness(dataset, level, wavelet, Aggregation::absolute_average, jobs);
  auto avgabs = effectiveness(dataset, level, wavelet, Aggregation::average_absolute, jobs);
  std::vector<double> deltas(absavg.values.size());
  for (std::size_t r = 0; r < deltas.size(); ++r) {
    deltas[r] = avgabs.values[r] - absavg.values[r];
  }
  auto sel_absavg = select_key_regions(absavg);
  auto sel_avgabs = select_key_regions(avgabs);
  return {std::move(absavg), std::move(avgabs), std::move(sel_absavg),
          std::move(sel_avgabs), std::move(deltas)};
}

nlohmann::json analysis_to_json(const EffectivenessMap& e, const RegionSelection& sel) {
  nlohmann::json regions = nlohmann::json::object();
  for (std::size_t r = 0; r < e.values.size(); ++r) {
    regions[RegionPath::from_index(r, e.level).str()] = e.values[r];
  }
  nlohmann::json selected = nlohmann::json::array();
  for (const auto& r : sel.regions()) selected.push_back(r.str());
  return {{"level", e.level},         {"wavelet", to_string(e.wavelet)},
          {"pad", e.pad},             {"mode", to_string(e.mode)},
          {"n_samples", e.n_samples}, {"regions", std::move(regions)},
          {"selected", std::move(selected)}};
}

nlohmann::json comparison_to_json(const AggregationComparison& cmp) {
  nlohmann::json deltas = nlohmann::json::object();
  for (std::size_t r = 0; r < cmp.deltas.size(); ++r) {
    deltas[RegionPath::from_index(r, cmp.absolute_average.level).str()] = cmp.deltas[r];
  }
  return {{"absavg", analysis_to_json(cmp.absolute_average, cmp.absolute_average_selection)},
          {"avgabs", analysis_to_json(cmp.average_absolute, cmp.average_absolute_selection)},
          {"deltas", std::move(deltas)}};
}

RegionSelection selection_from_json(const nlohmann::json& doc) {
  try {
    const int level = doc.at("level").get<int>();
    std::vector<RegionPath> paths;
    for (const auto& p : doc.at("selected")) paths.emplace_back(p.get<std::string>());
    return RegionSelection(level, std::move(paths));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", std::string("malformed analysis document: ") + e.what());
  }
}

}  // namespace wpkit
