#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wpkit/image.hpp"

namespace wpkit {

// Fraction of predicted[i] == truth[i]. Throws Error("empty-predictions") or
// Error("shape-mismatch").
double clean_accuracy(std::span<const int> predicted, std::span<const int> truth);

// Fraction of predictions equal to the target label.
double attack_success_rate(std::span<const int> predicted, int target);

struct DetectionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  double omega = 1.0;
};

// A score is nullopt when its denominator is zero (e.g. TPR with no true
// poisons) rather than silently 0.
struct DetectionScores {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> f1_omega;
};

// TPR = TP/(TP+FN), FPR = FP/(FP+TN), F1^w = 2TP/(2TP + FP + w*FN).
DetectionScores detection_scores(const DetectionCounts& c);

double mse(const Image& a, const Image& b);

// Single-scale SSIM with a normalized Gaussian window, evaluated at every
// position where the window fits inside the image ("valid"), averaged over
// positions and then over the three channels. C1 = (0.01 R)^2,
// C2 = (0.03 R)^2.
struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;
};

// Throws Error("shape-mismatch") or Error("image-too-small").
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

// Dense row-major matrix of feature vectors.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

// For every test row, the mean Euclidean distance to all train rows.
std::vector<double> averaged_l2_distances(const FeatureMatrix& train, const FeatureMatrix& test,
                                          unsigned jobs = 1);

struct DensityCurve {
  std::vector<double> xs;
  std::vector<double> ys;
  double bandwidth = 0.0;
  // Set when "auto" bandwidth hit a zero-spread sample and a fixed small
  // bandwidth was used instead.
  bool bandwidth_fallback = false;
};

// 0.9 * min(sd, IQR/1.34) * n^(-1/5); sd alone when the IQR is 0.
// Returns 0 for a sample without spread.
double silverman_bandwidth(std::span<const double> points);

// Gaussian KDE of `points`. The grid spans at least [0, 1.1 * max] and is
// widened by 4 bandwidths on either side when needed, so the curve
// integrates to 1. nullopt bandwidth means Silverman's rule.
DensityCurve gaussian_kde(std::span<const double> points, std::optional<double> bandwidth);

// gaussian_kde() over averaged_l2_distances(train, test).
DensityCurve l2_kde(const FeatureMatrix& train, const FeatureMatrix& test,
                    std::optional<double> bandwidth, unsigned jobs = 1);

double trapezoid(std::span<const double> xs, std::span<const double> ys);

// ".csv": header line (column names, or a single integer giving the
// dimension) then one row per sample. Anything else: raw f32le row-major
// data with a JSON header {rows, cols} at "<path>.json".
FeatureMatrix read_feature_matrix(const std::string& path);
void write_feature_matrix(const std::string& path, const FeatureMatrix& m);

// "index,<column>" CSV with a header line; returns values ordered by index.
// Throws Error("bad-format") for duplicate or missing indices.
std::vector<int> read_index_csv(const std::string& path);

// "x,y" CSV with header.
void write_density_csv(const std::string& path, const DensityCurve& curve);

}  // namespace wpkit
