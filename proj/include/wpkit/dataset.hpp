#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wpkit/image.hpp"

namespace wpkit {

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int n_classes = 0;
  std::string name;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  // |images| == |labels|, 0 <= label < n_classes, uniform image size.
  // Throws Error("invalid-dataset") / Error("mixed-sizes").
  void validate() const;
};

// Canonical byte encodings shared by persistence and hashing:
// images as f32 little-endian, sample-major, planar CHW inside a sample;
// labels as i32 little-endian.
std::vector<std::uint8_t> encode_images_f32(const LabeledDataset& ds);
std::vector<std::uint8_t> encode_labels_i32(const LabeledDataset& ds);

// SHA-256 over encode_images_f32() followed by encode_labels_i32(), i.e. the
// hash of images.f32 concatenated with labels.i32 as written by
// save_dataset() in raw format.
std::string dataset_sha256(const LabeledDataset& ds);

}  // namespace wpkit
