#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wpkit/dataset.hpp"
#include "wpkit/image.hpp"
#include "wpkit/poisoner.hpp"

namespace wpkit {

enum class CifarVariant { cifar10, cifar100 };
enum class CifarSplit { train, test };

// `path` is either one binary batch file or the extracted batch directory
// (cifar-10-batches-bin: data_batch_1..5.bin / test_batch.bin; cifar-100:
// train.bin / test.bin). Records are 1 label byte (CIFAR-100: coarse + fine,
// fine kept) followed by 3x1024 planar pixel bytes. Throws
// Error("empty-file"), Error("truncated-file") with the byte offset of the
// incomplete record, or Error("bad-label").
LabeledDataset load_cifar_binary(const std::string& path, CifarVariant variant,
                                 CifarSplit split = CifarSplit::train);

// root/<class>/*.{png,ppm,pgm,bmp}; classes indexed in sorted name order,
// files within a class in sorted name order. Throws Error("empty-class-dir"),
// Error("mixed-sizes") listing offenders, or Error("io-error").
LabeledDataset load_image_dir(const std::string& root);

// Reads any OpenCV-decodable image as RGB in [0,1] (8- or 16-bit sources).
Image read_image(const std::string& path);
// 8-bit RGB PNG/PPM/BMP by extension, clamped to [0,1].
void write_image_8bit(const std::string& path, const Image& img);

// Returns an empty string when `size` decomposes `level` times with `pad`,
// otherwise a warning that names the smallest pad that would.
std::string geometry_warning(std::size_t size, int level, int pad);

enum class StorageFormat { raw, png16 };
std::string to_string(StorageFormat format);
StorageFormat parse_storage_format(const std::string& text);

// Layout under out_root:
//   dataset.json   {format, name, n_samples, height, width, channels,
//                   n_classes, images, labels, storage_sha256}
//   images.f32     (raw) f32le, sample-major, planar CHW
//   images/NNNNNN.png (png16) 16-bit RGB, values clamped to [0,1]
//   labels.i32     i32le
//   manifest.json  PoisonManifest
// raw is bit-exact at f32 precision; png16 quantizes to 1/65535 steps.
void save_dataset(const LabeledDataset& ds, const PoisonManifest& manifest,
                  const std::string& out_root, StorageFormat format = StorageFormat::raw);

struct PoisonedDataset {
  LabeledDataset dataset;
  PoisonManifest manifest;
};

// Throws Error("missing-manifest") or Error("tampered-dataset") when the
// stored content no longer matches the recorded hashes.
PoisonedDataset load_poisoned(const std::string& out_root);

// Clamping 8-bit export: out_dir/NNNNNN_<label>.png per sample.
void export_png8(const LabeledDataset& ds, const std::string& out_dir);

}  // namespace wpkit
