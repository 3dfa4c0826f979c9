#include "wpkit/poisoner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wpkit/error.hpp"
#include "wpkit/parallel.hpp"

namespace wpkit {

namespace {

// Unbiased draw in [0, bound) from the raw 64-bit engine output, so the
// sequence is identical on every standard library.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      (std::numeric_limits<std::uint64_t>::max() % bound);
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return r % bound;
}

void check_inputs(const Image& x, const FrequencyTrigger& trigger, const PoisonMask& mask) {
  if (x.height() != x.width() || x.height() != mask.original_size()) {
    throw Error("shape-mismatch", "image is " + std::to_string(x.height()) + "x" +
                                      std::to_string(x.width()) + " but the mask expects " +
                                      std::to_string(mask.original_size()) + "x" +
                                      std::to_string(mask.original_size()));
  }
  mask.check_compatible(trigger.spec);
}

Image blend(const Image& x, const FrequencyTrigger& trigger, const PoisonMask& mask,
            double intensity, double alpha) {
  check_inputs(x, trigger, mask);
  Spectrogram spec = wpd(x, trigger.spec.level(), trigger.spec.wavelet());
  const auto m = mask.grid();
  const auto t = trigger.spec.coeffs();
  auto c = spec.coeffs();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (m[i] == 0) c[i] = alpha * c[i] + intensity * t[i];
  }
  return iwpd(spec);
}

}  // namespace

PoisonMask::PoisonMask(RegionSelection regions, std::size_t size, int level, int pad)
    : regions_(std::move(regions)), size_(size), level_(level), pad_(pad) {
  if (regions_.level() != level) {
    throw Error("bad-region-path", "selection has level " + std::to_string(regions_.level()) +
                                       " but the mask level is " + std::to_string(level));
  }
  check_geometry(size, level, pad);
  grid_side_ = size + 2 * static_cast<std::size_t>(pad);
  grid_.assign(kChannels * grid_side_ * grid_side_, 1);
  const std::size_t side = grid_side_ >> level;
  for (const auto& r : regions_.regions()) {
    // Region origin follows the same quadrant recursion as Spectrogram.
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    std::size_t block = grid_side_;
    for (char ch : r.str()) {
      block /= 2;
      if (ch == 'h' || ch == 'd') col0 += block;
      if (ch == 'v' || ch == 'd') row0 += block;
    }
    for (std::size_t c = 0; c < kChannels; ++c)
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
          grid_[(c * grid_side_ + row0 + y) * grid_side_ + col0 + x] = 0;
  }
}

std::size_t PoisonMask::zeros() const noexcept {
  return static_cast<std::size_t>(std::count(grid_.begin(), grid_.end(), std::uint8_t{0}));
}

std::vector<std::uint8_t> PoisonMask::complement() const {
  std::vector<std::uint8_t> out(grid_.size());
  std::transform(grid_.begin(), grid_.end(), out.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(1 - v); });
  return out;
}

void PoisonMask::check_compatible(const Spectrogram& spec) const {
  if (spec.level() != level_ || spec.original_size() != size_ ||
      spec.wavelet().pad != pad_ || spec.grid_side() != grid_side_) {
    throw Error("shape-mismatch",
                "spectrogram (level " + std::to_string(spec.level()) + ", size " +
                    std::to_string(spec.original_size()) + ", pad " +
                    std::to_string(spec.wavelet().pad) + ") does not match the mask (level " +
                    std::to_string(level_) + ", size " + std::to_string(size_) + ", pad " +
                    std::to_string(pad_) + ")");
  }
}

PoisonMask build_mask(const RegionSelection& sel, std::size_t size, int level, int pad) {
  return PoisonMask(sel, size, level, pad);
}

Image poison_train(const Image& x, const FrequencyTrigger& trigger, const PoisonMask& mask,
                   double k) {
  return blend(x, trigger, mask, k, 0.0);
}

Image poison_test(const Image& x, const FrequencyTrigger& trigger, const PoisonMask& mask,
                  double k_prime, double alpha) {
  return blend(x, trigger, mask, k_prime, alpha);
}

void PoisonConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid-config", what); };
  if (!(ratio > 0.0 && ratio <= 1.0)) fail("ratio must be in (0, 1]");
  if (!(k > 0.0) || !std::isfinite(k)) fail("k must be a finite value > 0");
  if (!(k_prime >= 0.0) || !std::isfinite(k_prime)) fail("k_prime must be a finite value >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must be in [0, 1]");
  if (regions.level() != level) fail("region selection level differs from the WPD level");
  if (target_label < 0) fail("target label must be >= 0");
}

nlohmann::json PoisonConfig::to_json() const {
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& r : regions.regions()) regs.push_back(r.str());
  return {{"level", level},
          {"wavelet", to_string(wavelet.name)},
          {"pad", wavelet.pad},
          {"regions", std::move(regs)},
          {"k", k},
          {"k_prime", k_prime},
          {"alpha", alpha},
          {"ratio", ratio},
          {"target_label", target_label},
          {"seed", seed},
          {"mask_original", mask_original}};
}

std::size_t poison_count(double ratio, std::size_t n, bool* clamped) {
  // The epsilon keeps exact halves (e.g. 2.5) from rounding down after the
  // multiplication picks up representation error.
  const double raw = ratio * static_cast<double>(n);
  auto count = static_cast<std::size_t>(std::floor(raw + 0.5 + 1e-9));
  const bool low = count == 0;
  if (clamped != nullptr) *clamped = low;
  return low ? 1 : count;
}

std::vector<std::size_t> select_poison_indices(std::span<const int> labels, int target,
                                               std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != target) pool.push_back(i);
  }
  if (pool.size() < count) {
    throw Error("insufficient-samples", "need " + std::to_string(count) +
                                            " non-target samples but only " +
                                            std::to_string(pool.size()) + " exist");
  }
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

nlohmann::json PoisonManifest::to_json() const {
  return {{"config", config},
          {"n_samples", n_samples},
          {"poisoned_indices", poisoned_indices},
          {"original_labels", original_labels},
          {"target_label", target_label},
          {"trigger_sha256", trigger_sha256},
          {"dataset_sha256", dataset_sha256}};
}

PoisonManifest PoisonManifest::from_json(const nlohmann::json& doc) {
  try {
    PoisonManifest m;
    m.config = doc.at("config");
    m.n_samples = doc.at("n_samples").get<std::size_t>();
    m.poisoned_indices = doc.at("poisoned_indices").get<std::vector<std::size_t>>();
    m.original_labels = doc.at("original_labels").get<std::vector<int>>();
    m.target_label = doc.at("target_label").get<int>();
    m.trigger_sha256 = doc.at("trigger_sha256").get<std::string>();
    m.dataset_sha256 = doc.at("dataset_sha256").get<std::string>();
    if (m.poisoned_indices.size() != m.original_labels.size()) {
      throw Error("bad-format", "manifest index and label lists differ in length");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", std::string("malformed manifest: ") + e.what());
  }
}

namespace {

void check_dataset_against(const LabeledDataset& ds, const PoisonConfig& cfg,
                           const FrequencyTrigger& trigger) {
  cfg.validate();
  ds.validate();
  if (ds.empty()) throw Error("empty-dataset", "cannot poison an empty dataset");
  if (cfg.target_label >= ds.n_classes) {
    throw Error("target-out-of-range", "target label " + std::to_string(cfg.target_label) +
                                           " is outside [0, " +
                                           std::to_string(ds.n_classes) + ")");
  }
  if (trigger.spec.level() != cfg.level || trigger.spec.wavelet().name != cfg.wavelet.name ||
      trigger.spec.wavelet().pad != cfg.wavelet.pad) {
    throw Error("shape-mismatch", "trigger decomposition does not match the configuration");
  }
}

}  // namespace

PoisonResult poison_dataset(const LabeledDataset& ds, const PoisonConfig& cfg,
                            const FrequencyTrigger& trigger, unsigned jobs) {
  check_dataset_against(ds, cfg, trigger);
  const PoisonMask mask = build_mask(cfg.regions, ds.images[0].height(), cfg.level,
                                     cfg.wavelet.pad);

  PoisonResult result;
  bool clamped = false;
  const std::size_t count = poison_count(cfg.ratio, ds.size(), &clamped);
  if (clamped) {
    result.warnings.push_back("ratio " + std::to_string(cfg.ratio) + " on " +
                              std::to_string(ds.size()) +
                              " samples rounds to 0 poisoned samples; using 1");
  }
  const auto indices = select_poison_indices(ds.labels, cfg.target_label, count, cfg.seed);

  result.dataset = ds;
  parallel_for(indices.size(), jobs, [&](std::size_t j) {
    const std::size_t i = indices[j];
    result.dataset.images[i] =
        cfg.mask_original ? poison_train(ds.images[i], trigger, mask, cfg.k)
                          : poison_test(ds.images[i], trigger, mask, cfg.k, cfg.alpha);
  });

  PoisonManifest& m = result.manifest;
  m.config = cfg.to_json();
  m.n_samples = ds.size();
  m.poisoned_indices = indices;
  for (std::size_t i : indices) {
    m.original_labels.push_back(ds.labels[i]);
    result.dataset.labels[i] = cfg.target_label;
  }
  m.target_label = cfg.target_label;
  m.trigger_sha256 = trigger.sha256();
  m.dataset_sha256 = dataset_sha256(result.dataset);
  return result;
}

PoisonResult poison_test_set(const LabeledDataset& ds, const PoisonConfig& cfg,
                             const FrequencyTrigger& trigger, unsigned jobs) {
  check_dataset_against(ds, cfg, trigger);
  const PoisonMask mask = build_mask(cfg.regions, ds.images[0].height(), cfg.level,
                                     cfg.wavelet.pad);
  PoisonResult result;
  PoisonManifest& m = result.manifest;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != cfg.target_label) {
      m.poisoned_indices.push_back(i);
      m.original_labels.push_back(ds.labels[i]);
    }
  }
  if (m.poisoned_indices.empty()) {
    throw Error("insufficient-samples", "test split has no non-target samples");
  }
  result.dataset.n_classes = ds.n_classes;
  result.dataset.name = ds.name + "-poisoned-test";
  result.dataset.images.resize(m.poisoned_indices.size());
  result.dataset.labels = m.original_labels;
  parallel_for(m.poisoned_indices.size(), jobs, [&](std::size_t j) {
    result.dataset.images[j] =
        poison_test(ds.images[m.poisoned_indices[j]], trigger, mask, cfg.k_prime, cfg.alpha);
  });
  m.config = cfg.to_json();
  m.n_samples = ds.size();
  m.target_label = cfg.target_label;
  m.trigger_sha256 = trigger.sha256();
  m.dataset_sha256 = dataset_sha256(result.dataset);
  return result;
}

}  // namespace wpkit
