#include "wpkit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "wpkit/binary_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/parallel.hpp"

namespace wpkit {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

// Separable "valid" filtering of a h x w plane.
std::vector<double> filter_valid(std::span<const double> plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t oh = h - n + 1;
  const std::size_t ow = w - n + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[j] * plane[y * w + x + j];
      tmp[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (s[hi] - s[lo]) * (pos - static_cast<double>(lo));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    field.erase(0, field.find_first_not_of(" \t\r"));
    field.erase(field.find_last_not_of(" \t\r") + 1);
    out.push_back(field);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      value = static_cast<T>(std::stod(text, &used));
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw Error("bad-format", where + ": '" + text + "' is not a number");
    }
  } else {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error("bad-format", where + ": '" + text + "' is not an integer");
    }
  }
  return value;
}

}  // namespace

double clean_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw Error("empty-predictions", "no predictions to score");
  if (predicted.size() != truth.size()) {
    throw Error("shape-mismatch", std::to_string(predicted.size()) + " predictions but " +
                                      std::to_string(truth.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double attack_success_rate(std::span<const int> predicted, int target) {
  if (predicted.empty()) throw Error("empty-predictions", "no predictions to score");
  const auto hits = std::count(predicted.begin(), predicted.end(), target);
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

DetectionScores detection_scores(const DetectionCounts& c) {
  if (!(c.omega > 0.0) || !std::isfinite(c.omega)) {
    throw Error("invalid-config", "omega must be a finite value > 0");
  }
  DetectionScores s;
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  const auto tn = static_cast<double>(c.tn);
  if (c.tp + c.fn > 0) s.tpr = tp / (tp + fn);
  if (c.fp + c.tn > 0) s.fpr = fp / (fp + tn);
  const double denom = 2.0 * tp + fp + c.omega * fn;
  if (denom > 0.0) s.f1_omega = 2.0 * tp / denom;
  return s;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("shape-mismatch", "MSE needs images of equal shape");
  if (a.empty()) throw Error("shape-mismatch", "MSE of empty images");
  double sum = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sum += d * d;
  }
  return sum / static_cast<double>(da.size());
}

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
  if (!a.same_shape(b)) throw Error("shape-mismatch", "SSIM needs images of equal shape");
  if (options.window == 0 || a.height() < options.window || a.width() < options.window) {
    throw Error("image-too-small", "SSIM window of " + std::to_string(options.window) +
                                       " does not fit a " + std::to_string(a.height()) + "x" +
                                       std::to_string(a.width()) + " image");
  }
  const auto k = gaussian_window(options.window, options.sigma);
  const double c1 = std::pow(0.01 * options.dynamic_range, 2);
  const double c2 = std::pow(0.03 * options.dynamic_range, 2);
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  double total = 0.0;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto pa = a.plane(c);
    const auto pb = b.plane(c);
    std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, k);
    const auto mu_b = filter_valid(pb, h, w, k);
    const auto e_aa = filter_valid(aa, h, w, k);
    const auto e_bb = filter_valid(bb, h, w, k);
    const auto e_ab = filter_valid(ab, h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(kChannels);
}

std::vector<double> averaged_l2_distances(const FeatureMatrix& train, const FeatureMatrix& test,
                                          unsigned jobs) {
  if (train.rows == 0 || test.rows == 0) {
    throw Error("empty-features", "both feature matrices need at least one row");
  }
  if (train.cols != test.cols) {
    throw Error("shape-mismatch", "train features have " + std::to_string(train.cols) +
                                      " columns, test features " + std::to_string(test.cols));
  }
  std::vector<double> out(test.rows);
  parallel_for(test.rows, jobs, [&](std::size_t t) {
    const auto q = test.row(t);
    double sum = 0.0;
    for (std::size_t p = 0; p < train.rows; ++p) {
      const auto r = train.row(p);
      double d2 = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double d = q[j] - r[j];
        d2 += d * d;
      }
      sum += std::sqrt(d2);
    }
    out[t] = sum / static_cast<double>(train.rows);
  });
  return out;
}

double silverman_bandwidth(std::span<const double> points) {
  const std::size_t n = points.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(points.begin(), points.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double p : points) ss += (p - mean) * (p - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

DensityCurve gaussian_kde(std::span<const double> points, std::optional<double> bandwidth) {
  if (points.empty()) throw Error("empty-features", "KDE needs at least one point");
  DensityCurve curve;
  const auto [min_it, max_it] = std::minmax_element(points.begin(), points.end());
  const double lo_pt = *min_it;
  const double hi_pt = *max_it;
  if (bandwidth) {
    if (!(*bandwidth > 0.0) || !std::isfinite(*bandwidth)) {
      throw Error("invalid-config", "bandwidth must be a finite value > 0");
    }
    curve.bandwidth = *bandwidth;
  } else {
    curve.bandwidth = silverman_bandwidth(points);
    if (!(curve.bandwidth > 0.0)) {
      const double scale = std::max(std::abs(hi_pt), std::abs(lo_pt));
      curve.bandwidth = scale > 0.0 ? 0.05 * scale : 1e-3;
      curve.bandwidth_fallback = true;
    }
  }
  const double h = curve.bandwidth;
  const double x0 = std::min(0.0, lo_pt - 4.0 * h);
  const double x1 = std::max(1.1 * hi_pt, hi_pt + 4.0 * h);
  // At least 256 points and a spacing of at most h/8 keeps the trapezoid
  // integral within 1e-3 of 1.
  const auto span_steps = static_cast<std::size_t>(std::ceil((x1 - x0) / (h / 8.0)));
  const std::size_t n_grid = std::clamp<std::size_t>(span_steps + 1, 256, std::size_t{1} << 20);
  curve.xs.resize(n_grid);
  curve.ys.assign(n_grid, 0.0);
  const double norm = kInvSqrt2Pi / (h * static_cast<double>(points.size()));
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n_grid - 1);
    curve.xs[i] = x;
    double s = 0.0;
    for (double p : points) {
      const double z = (x - p) / h;
      s += std::exp(-0.5 * z * z);
    }
    curve.ys[i] = s * norm;
  }
  return curve;
}

DensityCurve l2_kde(const FeatureMatrix& train, const FeatureMatrix& test,
                    std::optional<double> bandwidth, unsigned jobs) {
  const auto d = averaged_l2_distances(train, test, jobs);
  return gaussian_kde(d, bandwidth);
}

double trapezoid(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error("shape-mismatch", "trapezoid needs equal lengths");
  double s = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) s += 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
  return s;
}

FeatureMatrix read_feature_matrix(const std::string& path) {
  FeatureMatrix m;
  if (std::filesystem::path(path).extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw Error("io-error", "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("bad-format", path + ": missing header line");
    const auto header = split_csv(line);
    if (header.size() == 1 && !header[0].empty() &&
        std::all_of(header[0].begin(), header[0].end(), ::isdigit)) {
      m.cols = parse_number<std::size_t>(header[0], path + " header");
    } else {
      m.cols = header.size();
    }
    if (m.cols == 0) throw Error("bad-format", path + ": zero feature dimension");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto fields = split_csv(line);
      const std::string where = path + ":" + std::to_string(line_no);
      if (fields.size() != m.cols) {
        throw Error("bad-format", where + ": expected " + std::to_string(m.cols) +
                                      " values, found " + std::to_string(fields.size()));
      }
      for (const auto& f : fields) m.data.push_back(parse_number<double>(f, where));
      ++m.rows;
    }
    return m;
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_text_file(path + ".json"));
    m.rows = header.at("rows").get<std::size_t>();
    m.cols = header.at("cols").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", path + ".json: " + e.what());
  }
  const auto bytes = read_file(path);
  if (bytes.size() != m.rows * m.cols * sizeof(float)) {
    throw Error("bad-format", path + ": " + std::to_string(bytes.size()) +
                                  " bytes do not match the header's " +
                                  std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
  m.data.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = read_le<float>(bytes, i * 4);
  return m;
}

void write_feature_matrix(const std::string& path, const FeatureMatrix& m) {
  if (std::filesystem::path(path).extension() == ".csv") {
    std::ostringstream out;
    out.precision(17);
    out << m.cols << "\n";
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) out << (c ? "," : "") << m.data[r * m.cols + c];
      out << "\n";
    }
    write_text_file(path, out.str());
    return;
  }
  std::vector<std::uint8_t> bytes;
  for (double v : m.data) append_le(bytes, static_cast<float>(v));
  write_file(path, bytes);
  write_text_file(path + ".json",
                  nlohmann::json{{"rows", m.rows}, {"cols", m.cols}}.dump() + "\n");
}

std::vector<int> read_index_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io-error", "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("bad-format", path + ": missing header line");
  std::vector<std::pair<std::size_t, int>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != 2) throw Error("bad-format", where + ": expected 'index,value'");
    rows.emplace_back(parse_number<std::size_t>(fields[0], where),
                      parse_number<int>(fields[1], where));
  }
  std::sort(rows.begin(), rows.end());
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != i) {
      throw Error("bad-format", path + ": indices must be exactly 0.." +
                                    std::to_string(rows.size() - 1) + " (problem at " +
                                    std::to_string(rows[i].first) + ")");
    }
    out.push_back(rows[i].second);
  }
  return out;
}

void write_density_csv(const std::string& path, const DensityCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y\n";
  for (std::size_t i = 0; i < curve.xs.size(); ++i) out << curve.xs[i] << "," << curve.ys[i] << "\n";
  write_text_file(path, out.str());
}

}  // namespace wpkit
