#include "wpkit/trigger.hpp"

#include <filesystem>

#include <json.hpp>

#include "wpkit/binary_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/freq_analysis.hpp"
#include "wpkit/hash.hpp"

namespace wpkit {

namespace {

std::vector<std::uint8_t> grid_bytes(const Spectrogram& spec) {
  std::vector<std::uint8_t> out;
  out.reserve(spec.coeffs().size() * sizeof(double));
  for (double v : spec.coeffs()) append_le(out, v);
  return out;
}

double pooled_mean(const ConstRegionView& block) {
  CompensatedSum sum;
  block.for_each([&](double v) { sum.add(v); });
  return sum.value() / static_cast<double>(block.size());
}

std::string sidecar_path(const std::string& json_path) {
  std::filesystem::path p(json_path);
  p.replace_extension(".f64");
  return p.string();
}

}  // namespace

std::string to_string(TriggerPooling pooling) {
  return pooling == TriggerPooling::pooled ? "pooled" : "per_channel";
}

TriggerPooling parse_pooling(const std::string& text) {
  if (text == "pooled") return TriggerPooling::pooled;
  if (text == "per_channel") return TriggerPooling::per_channel;
  throw Error("bad-format", "unknown trigger pooling '" + text + "'");
}

Spectrogram average_transform(const Spectrogram& spec, TriggerPooling pooling) {
  Spectrogram out = spec;
  for (std::size_t r = 0; r < spec.region_count(); ++r) {
    const ConstRegionView src = spec.region(r);
    const RegionView dst = out.region(r);
    if (pooling == TriggerPooling::pooled) {
      dst.fill(pooled_mean(src));
      continue;
    }
    const std::size_t n = src.side();
    for (std::size_t c = 0; c < kChannels; ++c) {
      CompensatedSum sum;
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) sum.add(src.at(c, y, x));
      const double mean = sum.value() / static_cast<double>(n * n);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) dst.at(c, y, x) = mean;
    }
  }
  return out;
}

std::string FrequencyTrigger::sha256() const { return sha256_hex(grid_bytes(spec)); }

FrequencyTrigger make_frequency_trigger(const Image& trigger_img, std::size_t size,
                                        int level, const WaveletSpec& wavelet,
                                        TriggerPooling pooling) {
  if (trigger_img.height() <= 1 || trigger_img.width() <= 1) {
    throw Error("degenerate-trigger", "trigger image must be larger than 1x1 pixel");
  }
  trigger_img.validate();
  const Image resized = resize_bilinear(trigger_img, size, size);
  const Spectrogram raw = wpd(resized, level, wavelet);
  std::vector<double> means(raw.region_count());
  for (std::size_t r = 0; r < raw.region_count(); ++r) means[r] = pooled_mean(raw.region(r));
  return {average_transform(raw, pooling), pooling, std::move(means)};
}

void save_trigger(const FrequencyTrigger& trigger, const std::string& json_path) {
  const Spectrogram& s = trigger.spec;
  const auto bytes = grid_bytes(s);
  const std::string blob = sidecar_path(json_path);
  write_file(blob, bytes);

  nlohmann::json means = nlohmann::json::object();
  for (std::size_t r = 0; r < trigger.region_means.size(); ++r) {
    means[RegionPath::from_index(r, s.level()).str()] = trigger.region_means[r];
  }
  const nlohmann::json doc = {
      {"level", s.level()},
      {"wavelet", to_string(s.wavelet().name)},
      {"pad", s.wavelet().pad},
      {"original_size", s.original_size()},
      {"grid_side", s.grid_side()},
      {"pooling", to_string(trigger.pooling)},
      {"region_means", std::move(means)},
      {"coeffs_file", std::filesystem::path(blob).filename().string()},
      {"coeffs_layout", "f64le planar CHW"},
      {"coeffs_sha256", sha256_hex(bytes)}};
  write_text_file(json_path, doc.dump(2) + "\n");
}

FrequencyTrigger load_trigger(const std::string& json_path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", "trigger description " + json_path + ": " + e.what());
  }
  try {
    const int level = doc.at("level").get<int>();
    const auto wavelet = make_wavelet(parse_wavelet_name(doc.at("wavelet").get<std::string>()),
                                      doc.at("pad").get<int>());
    const auto size = doc.at("original_size").get<std::size_t>();
    const auto blob = (std::filesystem::path(json_path).parent_path() /
                       doc.at("coeffs_file").get<std::string>())
                          .string();
    const auto bytes = read_file(blob);
    if (sha256_hex(bytes) != doc.at("coeffs_sha256").get<std::string>()) {
      throw Error("tampered-trigger", "trigger grid " + blob + " does not match its hash");
    }
    if (bytes.size() % sizeof(double) != 0) {
      throw Error("layout-mismatch", "trigger grid size is not a multiple of 8 bytes");
    }
    std::vector<double> coeffs(bytes.size() / sizeof(double));
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      coeffs[i] = read_le<double>(bytes, i * sizeof(double));
    }
    Spectrogram spec(level, wavelet, size, std::move(coeffs));
    std::vector<double> means(spec.region_count());
    for (std::size_t r = 0; r < means.size(); ++r) {
      means[r] = doc.at("region_means").at(RegionPath::from_index(r, level).str()).get<double>();
    }
    return {std::move(spec), parse_pooling(doc.at("pooling").get<std::string>()),
            std::move(means)};
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", "trigger description " + json_path + ": " + e.what());
  }
}

}  // namespace wpkit
