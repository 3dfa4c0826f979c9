#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "wpkit/binary_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/metrics.hpp"

using namespace wpkit;

namespace {

// Window sums written out in 2D, no separable filtering.
double brute_ssim(const Image& a, const Image& b) {
  const int n = 11;
  double w[11][11];
  double total_w = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total_w += w[i][j];
    }
  const double c1 = 1e-4;
  const double c2 = 9e-4;
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
        const double var_a = saa - ma * ma;
        const double var_b = sbb - mb * mb;
        const double cov = sab - ma * mb;
        sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
    total += sum / static_cast<double>(count);
  }
  return total / 3.0;
}

FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  FeatureMatrix m{rows, cols, {}};
  for (std::size_t i = 0; i < rows * cols; ++i) m.data.push_back(d(rng));
  return m;
}

}  // namespace

TEST_CASE("accuracy and attack success rate") {
  const std::vector<int> pred = {1, 2, 3, 3};
  const std::vector<int> truth = {1, 2, 0, 3};
  CHECK(clean_accuracy(pred, truth) == 0.75);
  CHECK(attack_success_rate(pred, 3) == 0.5);
  CHECK(attack_success_rate(std::vector<int>(5, 7), 7) == 1.0);
  CHECK(attack_success_rate(std::vector<int>(5, 7), 0) == 0.0);
  CHECK_THROWS_AS(clean_accuracy({}, {}), Error);
  CHECK_THROWS_AS(clean_accuracy(pred, std::vector<int>{1}), Error);
}

TEST_CASE("detection scores") {
  const auto all_missed = detection_scores({0, 0, 10, 90});
  CHECK(*all_missed.tpr == 0.0);
  CHECK(*all_missed.fpr == 0.0);
  CHECK(*all_missed.f1_omega == 0.0);
  const auto none = detection_scores({0, 0, 0, 5});
  CHECK_FALSE(none.tpr.has_value());
  CHECK_FALSE(none.f1_omega.has_value());
  const auto s = detection_scores({8, 2, 2, 88, 2.0});
  CHECK(*s.tpr == 0.8);
  CHECK(*s.fpr == doctest::Approx(2.0 / 90.0));
  CHECK(*s.f1_omega == doctest::Approx(16.0 / 22.0));
  CHECK_THROWS_AS(detection_scores({1, 1, 1, 1, 0.0}), Error);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> n(0, 50);
  for (int i = 0; i < 200; ++i) {
    const DetectionCounts c{n(rng), n(rng), n(rng), n(rng), 0.5 * static_cast<double>(1 + i % 4)};
    const auto r = detection_scores(c);
    const double tp = static_cast<double>(c.tp);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    const double tn = static_cast<double>(c.tn);
    CHECK(r.tpr.has_value() == (c.tp + c.fn > 0));
    CHECK(r.fpr.has_value() == (c.fp + c.tn > 0));
    if (r.tpr) CHECK(std::abs(*r.tpr - tp / (tp + fn)) < 1e-15);
    if (r.fpr) CHECK(std::abs(*r.fpr - fp / (fp + tn)) < 1e-15);
    if (r.f1_omega) {
      // harmonic mean of precision and recall once FN is reweighted by omega
      const double precision = c.tp ? tp / (tp + fp) : 0.0;
      const double recall = c.tp ? tp / (tp + c.omega * fn) : 0.0;
      const double f1 = c.tp ? 2 * precision * recall / (precision + recall) : 0.0;
      CHECK(std::abs(*r.f1_omega - f1) < 1e-12);
    }
  }
}

TEST_CASE("mse and ssim") {
  const auto a = testing::random_image(16, 1);
  auto b = a;
  b.at(0, 3, 3) += 0.3;
  CHECK(mse(a, b) == doctest::Approx(0.09 / 768.0));
  CHECK(mse(a, a) == 0.0);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssim(a, b) < 1.0);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  CHECK_THROWS_AS(ssim(testing::random_image(8, 1), testing::random_image(8, 2)), Error);
  CHECK_THROWS_AS(mse(a, testing::random_image(8, 2)), Error);

  // skimage.metrics.structural_similarity(gaussian_weights=True, sigma=1.5,
  // use_sample_covariance=False, data_range=1)
  Image p(16, 16);
  Image q(16, 16);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        p.at(c, y, x) = static_cast<double>((3 * y + 5 * x + 7 * c) % 13) / 13.0;
        q.at(c, y, x) = std::min(1.0, p.at(c, y, x) + 0.05 * std::sin(static_cast<double>(x + 2 * y + c)));
      }
  CHECK(std::abs(ssim(p, q) - 0.9925249095421034) < 1e-12);
}

TEST_CASE("ssim and l2 distances against brute force") {
  std::mt19937_64 rng(5);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto a = testing::random_image(12 + i % 5, i);
    auto b = testing::random_image(12 + i % 5, 100 + i);
    CHECK(std::abs(ssim(a, b) - brute_ssim(a, b)) < 1e-10);
  }
  for (int i = 0; i < 20; ++i) {
    const auto train = random_features(2 + i % 3, 4 + i % 5, rng);
    const auto test = random_features(5, 4 + i % 5, rng);
    const auto d = averaged_l2_distances(train, test, 1 + i % 3);
    for (std::size_t t = 0; t < test.rows; ++t) {
      double s = 0.0;
      for (std::size_t p = 0; p < train.rows; ++p) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < train.cols; ++j)
          d2 += std::pow(test.data[t * test.cols + j] - train.data[p * train.cols + j], 2);
        s += std::sqrt(d2);
      }
      CHECK(std::abs(d[t] - s / static_cast<double>(train.rows)) < 1e-12);
    }
  }
  FeatureMatrix narrow{1, 2, {0, 0}};
  FeatureMatrix wide{1, 3, {0, 0, 0}};
  CHECK_THROWS_AS(averaged_l2_distances(narrow, wide), Error);
}

TEST_CASE("kernel density estimate") {
  const std::vector<double> pts = {1, 2, 3, 4, 10};
  CHECK(silverman_bandwidth(pts) == doctest::Approx(0.9735846228506357).epsilon(1e-12));
  const auto curve = gaussian_kde(pts, std::nullopt);
  CHECK_FALSE(curve.bandwidth_fallback);
  CHECK(std::abs(trapezoid(curve.xs, curve.ys) - 1.0) < 0.01);
  CHECK(curve.xs.front() <= 0.0);
  CHECK(curve.xs.back() >= 11.0);
  const std::size_t mid = curve.xs.size() / 2;
  double manual = 0.0;
  for (double p : pts) manual += std::exp(-0.5 * std::pow((curve.xs[mid] - p) / curve.bandwidth, 2));
  manual /= 5.0 * curve.bandwidth * std::sqrt(2.0 * M_PI);
  CHECK(curve.ys[mid] == doctest::Approx(manual).epsilon(1e-12));

  const std::vector<double> same = {2.0, 2.0, 2.0};
  const auto degenerate = gaussian_kde(same, std::nullopt);
  CHECK(degenerate.bandwidth_fallback);
  CHECK(std::abs(trapezoid(degenerate.xs, degenerate.ys) - 1.0) < 0.01);

  std::mt19937_64 rng(8);
  for (double h : {0.01, 0.2, 3.0}) {
    const auto c = l2_kde(random_features(2, 16, rng), random_features(100, 16, rng), h);
    CHECK(c.bandwidth == h);
    CHECK(std::abs(trapezoid(c.xs, c.ys) - 1.0) < 0.01);
  }
  CHECK_THROWS_AS(gaussian_kde(pts, -1.0), Error);
}

TEST_CASE("feature and index files") {
  testing::TempDir dir("features");
  std::mt19937_64 rng(2);
  auto m = random_features(3, 4, rng);
  for (double& v : m.data) v = static_cast<float>(v);
  write_feature_matrix(dir / "f.csv", m);
  write_feature_matrix(dir / "f.bin", m);
  for (const auto* name : {"f.csv", "f.bin"}) {
    const auto back = read_feature_matrix(dir / name);
    CHECK(back.rows == 3);
    CHECK(back.cols == 4);
    CHECK(back.data == m.data);
  }
  write_text_file(dir / "named.csv", "a,b\n1,2\n3,4\n");
  CHECK(read_feature_matrix(dir / "named.csv").data == std::vector<double>{1, 2, 3, 4});
  write_text_file(dir / "ragged.csv", "2\n1,2\n3\n");
  CHECK_THROWS_AS(read_feature_matrix(dir / "ragged.csv"), Error);
  write_file(dir / "short.bin", std::vector<std::uint8_t>(8));
  write_text_file(dir / "short.bin.json", R"({"rows": 3, "cols": 4})");
  CHECK_THROWS_AS(read_feature_matrix(dir / "short.bin"), Error);

  write_text_file(dir / "pred.csv", "index,pred\n2,9\n0,7\n1,8\n");
  CHECK(read_index_csv(dir / "pred.csv") == std::vector<int>{7, 8, 9});
  write_text_file(dir / "dup.csv", "index,pred\n0,1\n0,2\n");
  CHECK_THROWS_AS(read_index_csv(dir / "dup.csv"), Error);

  DensityCurve c;
  c.xs = {0.0, 1.0};
  c.ys = {0.5, 0.25};
  write_density_csv(dir / "d.csv", c);
  CHECK(read_text_file(dir / "d.csv") == "x,y\n0,0.5\n1,0.25\n");
}

TEST_CASE("metric worked examples and invariants") {
  const auto a = testing::random_image(8, 3);
  Image b = a;
  for (double& v : b.data()) v += 0.1;
  CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));

  CHECK(*detection_scores({8, 4, 2, 86}).f1_omega == doctest::Approx(0.7273).epsilon(1e-4));
  for (double w : {0.25, 1.0, 7.0}) CHECK(*detection_scores({10, 0, 0, 90, w}).f1_omega == 1.0);
  double prev = 2.0;
  for (double w : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double f = *detection_scores({8, 4, 5, 80, w}).f1_omega;
    CHECK(f <= prev);
    prev = f;
  }

  std::mt19937_64 rng(21);
  const auto train = random_features(6, 5, rng);
  const auto test = random_features(4, 5, rng);
  const auto base = averaged_l2_distances(train, test);

  SUBCASE("permuting rows permutes or preserves the distances") {
    FeatureMatrix train_rev{train.rows, train.cols, {}};
    FeatureMatrix test_rev{test.rows, test.cols, {}};
    for (std::size_t i = train.rows; i-- > 0;)
      train_rev.data.insert(train_rev.data.end(), train.row(i).begin(), train.row(i).end());
    for (std::size_t i = test.rows; i-- > 0;)
      test_rev.data.insert(test_rev.data.end(), test.row(i).begin(), test.row(i).end());
    const auto d = averaged_l2_distances(train_rev, test_rev);
    for (std::size_t t = 0; t < test.rows; ++t)
      CHECK(d[test.rows - 1 - t] == doctest::Approx(base[t]).epsilon(1e-13));
  }

  SUBCASE("a common shift of both sets leaves the curve unchanged") {
    auto shifted_train = train;
    auto shifted_test = test;
    for (std::size_t i = 0; i < shifted_train.data.size(); ++i) shifted_train.data[i] += 3.0 * static_cast<double>(i % 5);
    for (std::size_t i = 0; i < shifted_test.data.size(); ++i) shifted_test.data[i] += 3.0 * static_cast<double>(i % 5);
    const auto c0 = l2_kde(train, test, std::nullopt);
    const auto c1 = l2_kde(shifted_train, shifted_test, std::nullopt);
    REQUIRE(c0.xs.size() == c1.xs.size());
    CHECK(c1.bandwidth == doctest::Approx(c0.bandwidth).epsilon(1e-10));
    for (std::size_t i = 0; i < c0.ys.size(); ++i) CHECK(std::abs(c0.ys[i] - c1.ys[i]) < 1e-8);
  }

  SUBCASE("a single test point gives one bump at its distance") {
    FeatureMatrix one{1, test.cols, {test.row(0).begin(), test.row(0).end()}};
    const auto c = l2_kde(train, one, 0.05);
    const auto peak = std::max_element(c.ys.begin(), c.ys.end()) - c.ys.begin();
    CHECK(std::abs(c.xs[static_cast<std::size_t>(peak)] - base[0]) < 0.05);
    CHECK(c.ys[static_cast<std::size_t>(peak)] ==
          doctest::Approx(1.0 / (0.05 * std::sqrt(2.0 * M_PI))).epsilon(0.01));
  }

  SUBCASE("identical samples put the mass at zero distance") {
    FeatureMatrix same{3, 4, {}};
    for (int i = 0; i < 3; ++i) same.data.insert(same.data.end(), {0.5, -1.0, 2.0, 0.0});
    const auto c = l2_kde(same, same, std::nullopt);
    CHECK(c.bandwidth_fallback);
    double near_zero = 0.0;
    for (std::size_t i = 1; i < c.xs.size(); ++i)
      if (std::abs(c.xs[i]) < 0.01) near_zero += 0.5 * (c.ys[i] + c.ys[i - 1]) * (c.xs[i] - c.xs[i - 1]);
    CHECK(near_zero > 0.99);
  }
}
