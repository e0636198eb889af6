#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gnp/tensor.hpp"

namespace gnp {

/// Inputs [B x d] with one integer label per row.
struct Batch {
  Tensor inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t features() const { return inputs.cols(); }
  /// Rows `indices` of this batch, in that order.
  Batch select(const std::vector<std::size_t>& indices) const;
  void validate(int num_classes) const;
};

enum class DatasetKind { kTwoMoons, kGaussianBlobs, kSpirals, kIdxFiles };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kTwoMoons;
  std::size_t size = 2000;  // 0 means "all records" for idx_files
  double noise = 0.2;
  std::uint64_t seed = 0;
  double split = 0.5;       // train fraction
  int classes = 2;          // blobs and spirals only
  std::filesystem::path images_path;  // idx_files only
  std::filesystem::path labels_path;

  void validate() const;
};

struct Dataset {
  Batch train;
  Batch test;
  int num_classes = 2;
};

/// Pure function of the spec. Synthetic kinds are label balanced to within one
/// sample; train and test partition the generated samples.
Dataset generate_dataset(const DatasetSpec& spec);

/// Full synthetic sample set before the train/test split.
Batch make_two_moons(std::size_t n, double noise, std::uint64_t seed);
Batch make_gaussian_blobs(std::size_t n, int classes, double noise, std::uint64_t seed);
Batch make_spirals(std::size_t n, int classes, double noise, std::uint64_t seed);

// IDX container: big-endian magic {0, 0, type, ndims}, ndims big-endian u32
// extents, then the payload.
struct IdxArray {
  std::uint8_t type_code = 0x08;
  Tensor data;
};

IdxArray read_idx(const std::filesystem::path& path);
IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);
/// Writes an unsigned-byte IDX file; values are rounded and clamped to [0,255].
void write_idx_u8(const std::filesystem::path& path, const Tensor& data);

/// Seeded shuffle of [0, n) chunked into batches of `batch_size`; the final
/// partial batch is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t epoch_seed);
std::vector<Batch> batch_iter(const Batch& data, std::size_t batch_size,
                              std::uint64_t epoch_seed);

}  // namespace gnp
