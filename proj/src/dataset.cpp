#include "wpkit/dataset.hpp"

#include "wpkit/binary_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/hash.hpp"

namespace wpkit {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    throw Error("invalid-dataset", std::to_string(images.size()) + " images but " +
                                       std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw Error("invalid-dataset", "label " + std::to_string(labels[i]) + " of sample " +
                                         std::to_string(i) + " is outside [0, " +
                                         std::to_string(n_classes) + ")");
    }
  }
  for (std::size_t i = 1; i < images.size(); ++i) {
    if (!images[i].same_shape(images[0])) {
      throw Error("mixed-sizes", "sample " + std::to_string(i) +
                                     " differs in size from sample 0");
    }
  }
}

std::vector<std::uint8_t> encode_images_f32(const LabeledDataset& ds) {
  std::vector<std::uint8_t> out;
  std::size_t total = 0;
  for (const auto& img : ds.images) total += img.size();
  out.reserve(total * sizeof(float));
  for (const auto& img : ds.images) {
    for (double v : img.data()) append_le(out, static_cast<float>(v));
  }
  return out;
}

std::vector<std::uint8_t> encode_labels_i32(const LabeledDataset& ds) {
  std::vector<std::uint8_t> out;
  out.reserve(ds.labels.size() * sizeof(std::int32_t));
  for (int label : ds.labels) append_le(out, static_cast<std::int32_t>(label));
  return out;
}

std::string dataset_sha256(const LabeledDataset& ds) {
  Sha256 h;
  h.update(encode_images_f32(ds));
  h.update(encode_labels_i32(ds));
  return h.hex_digest();
}

}  // namespace wpkit
