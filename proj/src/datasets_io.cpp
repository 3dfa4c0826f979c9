#include "wpkit/datasets_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wpkit/binary_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/hash.hpp"
#include "wpkit/spectrogram.hpp"

namespace fs = std::filesystem;

namespace wpkit {

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPixels = kChannels * kCifarSide * kCifarSide;

void append_cifar_file(const std::string& file, CifarVariant variant, LabeledDataset& ds) {
  const auto bytes = read_file(file);
  const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
  const std::size_t record = label_bytes + kCifarPixels;
  if (bytes.empty()) throw Error("empty-file", file + " is empty");
  if (bytes.size() % record != 0) {
    const std::size_t offset = (bytes.size() / record) * record;
    throw Error("truncated-file", file + ": incomplete record at byte offset " +
                                      std::to_string(offset) + " (file has " +
                                      std::to_string(bytes.size()) + " bytes, records are " +
                                      std::to_string(record) + " bytes)");
  }
  const std::size_t n = bytes.size() / record;
  ds.images.reserve(ds.images.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * record;
    const int label = bytes[base + label_bytes - 1];
    if (label >= ds.n_classes) {
      throw Error("bad-label", file + ": record " + std::to_string(i) + " at byte offset " +
                                   std::to_string(base) + " has label " +
                                   std::to_string(label) + " >= " +
                                   std::to_string(ds.n_classes));
    }
    ds.labels.push_back(label);
    ds.images.push_back(Image::from_planar_bytes(
        std::span(bytes).subspan(base + label_bytes, kCifarPixels), kCifarSide, kCifarSide));
  }
}

Image from_mat(const cv::Mat& mat, const std::string& what) {
  cv::Mat rgb;
  if (mat.channels() == 1) {
    cv::cvtColor(mat, rgb, cv::COLOR_GRAY2RGB);
  } else if (mat.channels() == 4) {
    cv::cvtColor(mat, rgb, cv::COLOR_BGRA2RGB);
  } else if (mat.channels() == 3) {
    cv::cvtColor(mat, rgb, cv::COLOR_BGR2RGB);
  } else {
    throw Error("bad-format", what + ": unsupported channel count");
  }
  double scale = 0.0;
  if (rgb.depth() == CV_8U) {
    scale = 1.0 / 255.0;
  } else if (rgb.depth() == CV_16U) {
    scale = 1.0 / 65535.0;
  } else {
    throw Error("bad-format", what + ": unsupported pixel depth");
  }
  cv::Mat f;
  rgb.convertTo(f, CV_64F, scale);
  Image img(static_cast<std::size_t>(f.rows), static_cast<std::size_t>(f.cols));
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            row[x * 3 + static_cast<int>(c)];
      }
    }
  }
  return img;
}

cv::Mat to_bgr_mat(const Image& img, int depth) {
  const double scale = depth == CV_16U ? 65535.0 : 255.0;
  cv::Mat mat(static_cast<int>(img.height()), static_cast<int>(img.width()),
              CV_MAKETYPE(depth, 3));
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double v = std::round(std::clamp(img.at(c, y, x), 0.0, 1.0) * scale);
        const int bgr = 2 - static_cast<int>(c);
        if (depth == CV_16U) {
          mat.ptr<std::uint16_t>(static_cast<int>(y))[x * 3 + bgr] =
              static_cast<std::uint16_t>(v);
        } else {
          mat.ptr<std::uint8_t>(static_cast<int>(y))[x * 3 + bgr] =
              static_cast<std::uint8_t>(v);
        }
      }
    }
  }
  return mat;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".bmp";
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

Image quantize16(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
  return out;
}

}  // namespace

LabeledDataset load_cifar_binary(const std::string& path, CifarVariant variant,
                                 CifarSplit split) {
  LabeledDataset ds;
  ds.n_classes = variant == CifarVariant::cifar10 ? 10 : 100;
  ds.name = std::string(variant == CifarVariant::cifar10 ? "cifar10" : "cifar100") +
            (split == CifarSplit::train ? "-train" : "-test");
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    if (variant == CifarVariant::cifar10) {
      if (split == CifarSplit::train) {
        for (int i = 1; i <= 5; ++i) {
          files.push_back((fs::path(path) / ("data_batch_" + std::to_string(i) + ".bin")).string());
        }
      } else {
        files.push_back((fs::path(path) / "test_batch.bin").string());
      }
    } else {
      files.push_back((fs::path(path) / (split == CifarSplit::train ? "train.bin" : "test.bin"))
                          .string());
    }
  } else {
    files.push_back(path);
  }
  for (const auto& f : files) {
    if (!fs::exists(f)) throw Error("io-error", "missing CIFAR batch " + f);
    append_cifar_file(f, variant, ds);
  }
  return ds;
}

Image read_image(const std::string& path) {
  const cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw Error("io-error", "cannot decode image " + path);
  return from_mat(mat, path);
}

void write_image_8bit(const std::string& path, const Image& img) {
  if (!cv::imwrite(path, to_bgr_mat(img, CV_8U))) {
    throw Error("io-error", "cannot write image " + path);
  }
}

LabeledDataset load_image_dir(const std::string& root) {
  if (!fs::is_directory(root)) throw Error("io-error", root + " is not a directory");
  std::vector<fs::path> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw Error("empty-class-dir", root + " has no class directories");

  LabeledDataset ds;
  ds.name = fs::path(root).filename().string();
  ds.n_classes = static_cast<int>(classes.size());
  std::vector<std::string> files_in_order;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(classes[label])) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw Error("empty-class-dir", "class directory " + classes[label].string() +
                                         " contains no images");
    }
    for (const auto& f : files) {
      ds.images.push_back(read_image(f.string()));
      ds.labels.push_back(static_cast<int>(label));
      files_in_order.push_back(f.string());
    }
  }
  std::string offenders;
  for (std::size_t i = 1; i < ds.images.size(); ++i) {
    if (!ds.images[i].same_shape(ds.images[0])) {
      offenders += "\n  " + files_in_order[i] + " (" + std::to_string(ds.images[i].height()) +
                   "x" + std::to_string(ds.images[i].width()) + ")";
    }
  }
  if (!offenders.empty()) {
    throw Error("mixed-sizes", "images differ from " + files_in_order[0] + " (" +
                                   std::to_string(ds.images[0].height()) + "x" +
                                   std::to_string(ds.images[0].width()) + "):" + offenders);
  }
  return ds;
}

std::string geometry_warning(std::size_t size, int level, int pad) {
  const std::size_t side = size + 2 * static_cast<std::size_t>(pad);
  const std::size_t step = std::size_t{1} << level;
  if (side % step == 0) return {};
  return "images of size " + std::to_string(size) + " with pad " + std::to_string(pad) +
         " give " + std::to_string(side) + ", not divisible by 2^" + std::to_string(level) +
         "; level " + std::to_string(level) + " needs an explicit pad such as " +
         std::to_string(smallest_valid_pad(size, level, pad));
}

std::string to_string(StorageFormat format) {
  return format == StorageFormat::raw ? "raw" : "png16";
}

StorageFormat parse_storage_format(const std::string& text) {
  if (text == "raw") return StorageFormat::raw;
  if (text == "png16") return StorageFormat::png16;
  throw Error("bad-format", "unknown storage format '" + text + "' (expected raw or png16)");
}

void save_dataset(const LabeledDataset& ds, const PoisonManifest& manifest,
                  const std::string& out_root, StorageFormat format) {
  ds.validate();
  if (ds.empty()) throw Error("empty-dataset", "refusing to save an empty dataset");
  fs::create_directories(out_root);
  const fs::path root(out_root);

  std::string storage_hash;
  if (format == StorageFormat::raw) {
    const auto images = encode_images_f32(ds);
    const auto labels = encode_labels_i32(ds);
    write_file((root / "images.f32").string(), images);
    write_file((root / "labels.i32").string(), labels);
    Sha256 h;
    h.update(images);
    h.update(labels);
    storage_hash = h.hex_digest();
  } else {
    fs::create_directories(root / "images");
    LabeledDataset stored;
    stored.n_classes = ds.n_classes;
    stored.labels = ds.labels;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto file = (root / "images" / (sample_name(i) + ".png")).string();
      if (!cv::imwrite(file, to_bgr_mat(ds.images[i], CV_16U))) {
        throw Error("io-error", "cannot write " + file);
      }
      stored.images.push_back(quantize16(ds.images[i]));
    }
    write_file((root / "labels.i32").string(), encode_labels_i32(ds));
    storage_hash = dataset_sha256(stored);
  }

  const nlohmann::json index = {
      {"format", to_string(format)},
      {"name", ds.name},
      {"n_samples", ds.size()},
      {"height", ds.images[0].height()},
      {"width", ds.images[0].width()},
      {"channels", kChannels},
      {"n_classes", ds.n_classes},
      {"images", format == StorageFormat::raw ? "images.f32" : "images/"},
      {"images_layout", format == StorageFormat::raw ? "f32le NCHW" : "png16 RGB"},
      {"labels", "labels.i32"},
      {"storage_sha256", storage_hash}};
  write_text_file((root / "dataset.json").string(), index.dump(2) + "\n");
  write_text_file((root / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
}

PoisonedDataset load_poisoned(const std::string& out_root) {
  const fs::path root(out_root);
  if (!fs::exists(root / "manifest.json")) {
    throw Error("missing-manifest", "no manifest.json under " + out_root);
  }
  if (!fs::exists(root / "dataset.json")) {
    throw Error("io-error", "no dataset.json under " + out_root);
  }
  nlohmann::json index;
  PoisonedDataset out;
  try {
    index = nlohmann::json::parse(read_text_file((root / "dataset.json").string()));
    out.manifest = PoisonManifest::from_json(
        nlohmann::json::parse(read_text_file((root / "manifest.json").string())));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", out_root + ": " + e.what());
  }

  LabeledDataset& ds = out.dataset;
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  StorageFormat format = StorageFormat::raw;
  std::string storage_hash;
  try {
    format = parse_storage_format(index.at("format").get<std::string>());
    n = index.at("n_samples").get<std::size_t>();
    h = index.at("height").get<std::size_t>();
    w = index.at("width").get<std::size_t>();
    ds.n_classes = index.at("n_classes").get<int>();
    ds.name = index.at("name").get<std::string>();
    storage_hash = index.at("storage_sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-format", out_root + "/dataset.json: " + e.what());
  }

  const auto labels = read_file((root / "labels.i32").string());
  if (labels.size() != n * sizeof(std::int32_t)) {
    throw Error("tampered-dataset", "labels.i32 has " + std::to_string(labels.size()) +
                                        " bytes, expected " + std::to_string(n * 4));
  }
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(read_le<std::int32_t>(labels, i * 4));

  if (format == StorageFormat::raw) {
    const auto images = read_file((root / "images.f32").string());
    const std::size_t per = kChannels * h * w;
    if (images.size() != n * per * sizeof(float)) {
      throw Error("tampered-dataset", "images.f32 size does not match dataset.json");
    }
    ds.images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Image img(h, w);
      auto d = img.data();
      for (std::size_t j = 0; j < per; ++j) {
        d[j] = read_le<float>(images, (i * per + j) * sizeof(float));
      }
      ds.images.push_back(std::move(img));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto file = (root / "images" / (sample_name(i) + ".png")).string();
      const cv::Mat mat = cv::imread(file, cv::IMREAD_UNCHANGED);
      if (mat.empty() || mat.depth() != CV_16U) {
        throw Error("tampered-dataset", file + " is missing or not a 16-bit image");
      }
      ds.images.push_back(from_mat(mat, file));
      if (ds.images.back().height() != h || ds.images.back().width() != w) {
        throw Error("tampered-dataset", file + " has unexpected dimensions");
      }
    }
  }

  const std::string actual = dataset_sha256(ds);
  if (actual != storage_hash) {
    throw Error("tampered-dataset", out_root + ": stored content hash " + actual +
                                        " does not match dataset.json (" + storage_hash + ")");
  }
  if (format == StorageFormat::raw && actual != out.manifest.dataset_sha256) {
    throw Error("tampered-dataset", out_root + ": content hash does not match manifest.json");
  }
  ds.validate();
  return out;
}

void export_png8(const LabeledDataset& ds, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto file =
        (fs::path(out_dir) / (sample_name(i) + "_" + std::to_string(ds.labels[i]) + ".png"))
            .string();
    write_image_8bit(file, ds.images[i]);
  }
}

}  // namespace wpkit
