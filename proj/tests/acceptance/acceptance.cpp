#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "wpkit/binary_io.hpp"
#include "wpkit/cli.hpp"
#include "wpkit/datasets_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/freq_analysis.hpp"
#include "wpkit/metrics.hpp"
#include "wpkit/poisoner.hpp"

using namespace wpkit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
void guarded(const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("threw: ") + e.what());
  }
}

void reconstruction_and_energy() {
  const std::pair<int, int> configs[] = {{1, 2}, {2, 2}, {3, 4}};
  std::vector<Image> corpus;
  for (std::uint64_t i = 0; i < 1000; ++i) corpus.push_back(testing::random_image(32, i));
  double worst_err = 0.0;
  double worst_energy = 0.0;
  const auto t0 = Clock::now();
  for (auto [level, pad] : configs) {
    const auto w = make_wavelet(WaveletName::db3, pad);
    for (const auto& img : corpus) {
      const auto spec = wpd(img, level, w);
      worst_err = std::max(worst_err, max_abs_diff(iwpd(spec), img));
      const double e_in = squared_norm(pad_image(img, pad).data());
      worst_energy = std::max(worst_energy, std::abs(squared_norm(spec.coeffs()) - e_in) / e_in);
    }
  }
  const double elapsed = seconds_since(t0);
  report("perfect_reconstruction", worst_err < 1e-8 && elapsed < 30.0,
         "1000 images x N=1,2,3 (pads 2,2,4), max |x - iwpd(wpd(x))| = " + fmt(worst_err) +
             " (< 1e-8), " + fmt(elapsed) + " s single-threaded (< 30 s)");
  report("energy_conservation", worst_energy < 1e-8,
         "max relative energy error on the padded grid = " + fmt(worst_energy) + " (< 1e-8)");
}

void toy_arithmetic() {
  const std::vector<double> clean = {-3, 4, -2, 5};
  const std::vector<double> noisy = {-3.1, 3.9, -1.9, 4.2};
  const double a = aggregate_block(clean, Aggregation::absolute_average);
  const double b = aggregate_block(clean, Aggregation::average_absolute);
  const double c = aggregate_block(noisy, Aggregation::average_absolute);
  const double d = aggregate_block(noisy, Aggregation::absolute_average);
  const bool pass = a == 1.0 && b == 3.5 && std::abs(c - 3.275) < 1e-12 && std::abs(d - 0.775) < 1e-12;
  // The printed 1.025 for the noisy absolute average does not follow from
  // the listed coefficients: |(-3.1 + 3.9 - 1.9 + 4.2) / 4| = 0.775.
  report("toy_arithmetic", pass,
         "absavg=" + fmt(a) + " avgabs=" + fmt(b) + " noisy avgabs=" + fmt(c) + " noisy absavg=" +
             fmt(d) + " (0.775 from the listed values; the printed 1.025 is inconsistent with them)");
}

void equation_identity() {
  const auto trig = make_frequency_trigger(testing::structured_image(40, 5), 32, 2, make_wavelet());
  const auto mask = build_mask(RegionSelection::parse(2, "ah,ha,va,dh"), 32, 2, 2);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto x = testing::random_image(32, 5000 + i);
    worst = std::max(worst, max_abs_diff(poison_test(x, trig, mask, 6.0, 0.0),
                                         poison_train(x, trig, mask, 6.0)));
  }
  report("equation_identity", worst <= 1e-10,
         "max |poison_test(alpha=0, k'=k) - poison_train(k)| over 100 images = " + fmt(worst));
}

void poison_count_exactness() {
  // Content does not influence the count, so small images keep memory low.
  LabeledDataset ds;
  ds.n_classes = 10;
  ds.name = "synthetic-50k";
  const Image blank(8, 8, 0.5);
  ds.images.assign(50000, blank);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.labels.push_back(static_cast<int>(i % 10));
  PoisonConfig cfg;
  cfg.regions = RegionSelection::parse(2, "ah,ha,va,dh");
  cfg.ratio = 0.00004;
  const auto trig = make_frequency_trigger(testing::structured_image(16, 2), 8, 2, make_wavelet());
  const auto res = poison_dataset(ds, cfg, trig);
  const auto n = res.manifest.poisoned_indices.size();
  report("poison_count", n == 2 && res.warnings.empty(),
         "p=0.004% on 50000 samples -> " + std::to_string(n) + " poisoned manifest entries");
}

double brute_ssim(const Image& a, const Image& b) {
  constexpr int n = 11;
  double w[n][n];
  double total_w = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
      total_w += w[i][j];
    }
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + n <= a.height(); ++y)
      for (std::size_t x = 0; x + n <= a.width(); ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double k = w[i][j] / total_w;
            const double va = a.at(c, y + i, x + j);
            const double vb = b.at(c, y + i, x + j);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        sum += (2 * ma * mb + 1e-4) * (2 * (sab - ma * mb) + 9e-4) /
               ((ma * ma + mb * mb + 1e-4) * (saa - ma * ma + sbb - mb * mb + 9e-4));
        ++count;
      }
    total += sum / static_cast<double>(count);
  }
  return total / 3.0;
}

void metrics_oracles() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::uint64_t> count(0, 200);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int instances = 100;

  double det_err = 0.0;
  for (int i = 0; i < instances; ++i) {
    const DetectionCounts c{count(rng), count(rng), count(rng), count(rng), 0.25 * (1 + i % 8)};
    const auto s = detection_scores(c);
    const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn), tn = double(c.tn);
    if (s.tpr.has_value() != (c.tp + c.fn > 0) || s.fpr.has_value() != (c.fp + c.tn > 0)) det_err = 1;
    if (s.tpr) det_err = std::max(det_err, std::abs(*s.tpr - tp / (tp + fn)));
    if (s.fpr) det_err = std::max(det_err, std::abs(*s.fpr - fp / (fp + tn)));
    if (s.f1_omega) {
      const double p = c.tp ? tp / (tp + fp) : 0.0;
      const double r = c.tp ? tp / (tp + c.omega * fn) : 0.0;
      det_err = std::max(det_err, std::abs(*s.f1_omega - (c.tp ? 2 * p * r / (p + r) : 0.0)));
    }
  }

  double mse_err = 0.0;
  double ssim_err = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t side = 11 + static_cast<std::size_t>(i % 6);
    const auto a = testing::random_image(side, 10000 + static_cast<std::uint64_t>(i));
    auto b = a;
    for (double& v : b.data()) v += 0.1 * normal(rng);
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sq += (a.data()[k] - b.data()[k]) * (a.data()[k] - b.data()[k]);
    mse_err = std::max(mse_err, std::abs(mse(a, b) - sq / static_cast<double>(a.size())));
    ssim_err = std::max(ssim_err, std::abs(ssim(a, b) - brute_ssim(a, b)));
  }

  double l2_err = 0.0;
  double kde_err = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t d = 2 + static_cast<std::size_t>(i % 7);
    FeatureMatrix train{1 + static_cast<std::size_t>(i % 4), d, {}};
    FeatureMatrix test{3 + static_cast<std::size_t>(i % 5), d, {}};
    for (std::size_t k = 0; k < train.rows * d; ++k) train.data.push_back(normal(rng));
    for (std::size_t k = 0; k < test.rows * d; ++k) test.data.push_back(normal(rng));
    const auto dist = averaged_l2_distances(train, test);
    for (std::size_t t = 0; t < test.rows; ++t) {
      double acc = 0.0;
      for (std::size_t p = 0; p < train.rows; ++p) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = test.data[t * d + j] - train.data[p * d + j];
          d2 += diff * diff;
        }
        acc += std::sqrt(d2);
      }
      l2_err = std::max(l2_err, std::abs(dist[t] - acc / static_cast<double>(train.rows)));
    }
    const std::optional<double> h = i % 2 ? std::nullopt : std::optional<double>(0.05 + 0.01 * i);
    const auto curve = gaussian_kde(dist, h);
    kde_err = std::max(kde_err, std::abs(trapezoid(curve.xs, curve.ys) - 1.0));
  }

  report("metrics_detection_scores", det_err <= 1e-10,
         std::to_string(instances) + " random confusion counts, max error " + fmt(det_err));
  report("metrics_mse", mse_err <= 1e-10,
         std::to_string(instances) + " random image pairs, max error " + fmt(mse_err));
  report("metrics_ssim", ssim_err <= 1e-10,
         std::to_string(instances) + " random image pairs vs direct 2D windows, max error " + fmt(ssim_err));
  report("metrics_l2_distances", l2_err <= 1e-10,
         std::to_string(instances) + " random feature sets, max error " + fmt(l2_err));
  report("metrics_kde_normalization", kde_err <= 0.01,
         std::to_string(instances) + " curves, max |integral - 1| = " + fmt(kde_err));
}

int run_quiet(std::vector<std::string> args) {
  args.insert(args.begin(), "wpkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

void pipeline_determinism() {
  testing::TempDir dir("acceptance");
  const fs::path data = dir.path() / "cifar";
  fs::create_directories(data);
  for (int b = 1; b <= 5; ++b) {
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0; i < 100; ++i) {
      bytes.push_back(static_cast<std::uint8_t>(i % 10));
      const auto img = testing::structured_image(32, 1000 * static_cast<std::uint64_t>(b) + i);
      for (double v : img.data()) bytes.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    write_file((data / ("data_batch_" + std::to_string(b) + ".bin")).string(), bytes);
  }
  write_image_8bit(dir / "trigger.png", testing::structured_image(64, 31337));

  auto args = [&](const std::string& out, const std::string& jobs) {
    return std::vector<std::string>{"poison", "--dataset", data.string(), "--trigger", dir / "trigger.png",
                                    "--ratio", "0.01", "--target", "3", "--seed", "42",
                                    "--out", dir / out, "--jobs", jobs};
  };
  const bool ran = run_quiet(args("run1", "1")) == 0 && run_quiet(args("run2", "0")) == 0;
  std::size_t compared = 0;
  bool identical = ran;
  if (ran) {
    for (const auto& entry : fs::recursive_directory_iterator(dir.path() / "run1")) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), dir.path() / "run1");
      const auto other = dir.path() / "run2" / rel;
      identical = identical && fs::exists(other) &&
                  read_file(entry.path().string()) == read_file(other.string());
      ++compared;
    }
  }
  report("pipeline_determinism", identical && compared >= 6,
         std::to_string(compared) + " output files from two poison runs (1 vs all threads) " +
             (identical ? "byte-identical" : "differ"));
}

// ---------------------------------------------------------------------------
// Criteria that need the real CIFAR-10 training set.

FrequencyTrigger unaveraged_trigger(const Image& img, std::size_t size, int level, const WaveletSpec& w) {
  FrequencyTrigger t = make_frequency_trigger(img, size, level, w);
  t.spec = wpd(resize_bilinear(img, size, size), level, w);
  return t;
}

int cifar_criteria() {
  const char* root = std::getenv("WPKIT_CIFAR10_DIR");
  if (root == nullptr || !fs::exists(fs::path(root) / "data_batch_1.bin")) {
    std::cout << "[SKIP] key_region_reproduction: set WPKIT_CIFAR10_DIR to the extracted "
                 "cifar-10-batches-bin directory\n"
              << "[SKIP] stealth_ordering: needs the same CIFAR-10 directory" << std::endl;
    return 77;
  }
  guarded("key_region_reproduction", [&] {
    const auto train = load_cifar_binary(root, CifarVariant::cifar10);
    const auto expected = RegionSelection::parse(2, "ah,ha,va,dh");
    std::string detail;
    bool default_ok = false;
    double default_seconds = 0.0;
    for (auto name : {WaveletName::db3, WaveletName::db2, WaveletName::db4}) {
      const auto t0 = Clock::now();
      const auto e = effectiveness(train.images, 2, make_wavelet(name, 2), Aggregation::absolute_average, 0);
      const auto sel = select_key_regions(e);
      const double s = seconds_since(t0);
      if (name == WaveletName::db3) {
        default_ok = sel == expected;
        default_seconds = s;
      }
      detail += to_string(name) + "={" + sel.to_csv() + "}" + (sel == expected ? " matches" : "") + "; ";
    }
    report("key_region_reproduction", default_ok && default_seconds < 300.0,
           std::to_string(train.size()) + " images, " + detail + "default db3 took " + fmt(default_seconds) + " s");
  });
  guarded("stealth_ordering", [&] {
    const auto test = load_cifar_binary(root, CifarVariant::cifar10, CifarSplit::test);
    const auto w = make_wavelet();
    const auto mask = build_mask(RegionSelection::parse(2, "ah,ha,va,dh"), 32, 2, 2);
    // The first test image stands in as the trigger picture; clean images
    // are the next 40.
    const auto with_t = make_frequency_trigger(test.images[0], 32, 2, w);
    const auto without_t = unaveraged_trigger(test.images[0], 32, 2, w);
    double ssim_with = 0, ssim_without = 0, mse_with = 0, mse_without = 0;
    const std::size_t n = 40;
    for (std::size_t i = 1; i <= n; ++i) {
      const auto& x = test.images[i];
      const auto a = poison_train(x, with_t, mask, 6.0);
      const auto b = poison_train(x, without_t, mask, 6.0);
      ssim_with += ssim(x, a) / n;
      ssim_without += ssim(x, b) / n;
      mse_with += mse(x, a) / n;
      mse_without += mse(x, b) / n;
    }
    report("stealth_ordering", ssim_with > ssim_without && mse_with < mse_without,
           std::to_string(n) + " CIFAR-10 test images: mean SSIM " + fmt(ssim_with) + " (with T) vs " +
               fmt(ssim_without) + " (without), mean MSE " + fmt(mse_with) + " vs " + fmt(mse_without));
  });
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1 && std::string(argv[1]) == "--cifar10") return cifar_criteria();
  guarded("perfect_reconstruction", reconstruction_and_energy);
  guarded("toy_arithmetic", toy_arithmetic);
  guarded("equation_identity", equation_identity);
  guarded("poison_count", poison_count_exactness);
  guarded("metrics_oracles", metrics_oracles);
  guarded("pipeline_determinism", pipeline_determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
