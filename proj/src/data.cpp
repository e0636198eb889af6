#include "gnp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "gnp/error.hpp"
#include "gnp/rng.hpp"

namespace gnp {

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

std::vector<std::size_t> shuffled_range(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

// Class sizes differing by at most one.
std::vector<std::size_t> balanced_counts(std::size_t n, int classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), n / classes);
  for (std::size_t k = 0; k < n % static_cast<std::size_t>(classes); ++k) ++counts[k];
  return counts;
}

double linspace_at(std::size_t i, std::size_t count, double lo, double hi) {
  if (count <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

void add_noise(Tensor& x, double noise, std::uint64_t seed) {
  if (noise <= 0.0) return;
  Rng rng(mix_seed(seed, kNoiseStream));
  std::normal_distribution<double> gauss(0.0, noise);
  for (double& v : x.values()) v += gauss(rng);
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

std::size_t idx_element_size(std::uint8_t type) {
  switch (type) {
    case 0x08:
    case 0x09:
      return 1;
    case 0x0B:
      return 2;
    case 0x0C:
    case 0x0D:
      return 4;
    case 0x0E:
      return 8;
    default:
      throw IoError("unsupported IDX element type 0x" + std::to_string(type));
  }
}

double idx_element(const std::uint8_t* p, std::uint8_t type) {
  switch (type) {
    case 0x08:
      return static_cast<double>(p[0]);
    case 0x09:
      return static_cast<double>(static_cast<std::int8_t>(p[0]));
    case 0x0B:
      return static_cast<double>(static_cast<std::int16_t>((p[0] << 8) | p[1]));
    case 0x0C: {
      const std::uint32_t u = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                              (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
      return static_cast<double>(static_cast<std::int32_t>(u));
    }
    case 0x0D: {
      const std::uint32_t u = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                              (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
      float f;
      std::memcpy(&f, &u, sizeof f);
      return static_cast<double>(f);
    }
    default: {
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) u = (u << 8) | p[i];
      double d;
      std::memcpy(&d, &u, sizeof d);
      return d;
    }
  }
}

}  // namespace

Batch Batch::select(const std::vector<std::size_t>& indices) const {
  const std::size_t d = features();
  std::vector<double> rows;
  rows.reserve(indices.size() * d);
  std::vector<int> labs;
  labs.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw ShapeError("batch row index out of range");
    auto src = inputs.values().subspan(i * d, d);
    rows.insert(rows.end(), src.begin(), src.end());
    labs.push_back(labels[i]);
  }
  return Batch{Tensor({indices.size(), d}, std::move(rows)), std::move(labs)};
}

void Batch::validate(int num_classes) const {
  if (labels.empty()) throw ShapeError("empty batch");
  if (inputs.rank() != 2 || inputs.rows() != labels.size()) {
    throw ShapeError("batch inputs " + shape_string(inputs.shape()) + " do not match " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "two_moons") return DatasetKind::kTwoMoons;
  if (name == "gaussian_blobs") return DatasetKind::kGaussianBlobs;
  if (name == "spirals") return DatasetKind::kSpirals;
  if (name == "idx_files") return DatasetKind::kIdxFiles;
  throw ConfigError("unknown dataset kind '" + name + "'");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kTwoMoons:
      return "two_moons";
    case DatasetKind::kGaussianBlobs:
      return "gaussian_blobs";
    case DatasetKind::kSpirals:
      return "spirals";
    case DatasetKind::kIdxFiles:
      return "idx_files";
  }
  return "unknown";
}

void DatasetSpec::validate() const {
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must lie in (0,1)");
  if (noise < 0.0) throw ConfigError("noise must be non-negative");
  if (kind == DatasetKind::kIdxFiles) {
    if (images_path.empty() || labels_path.empty()) {
      throw ConfigError("idx_files needs both an images and a labels path");
    }
    return;
  }
  if (size < 2) throw ConfigError("dataset size must be at least 2");
  if (classes < 2) throw ConfigError("need at least two classes");
  if (kind == DatasetKind::kTwoMoons && classes != 2) {
    throw ConfigError("two_moons always has two classes");
  }
}

Batch make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  const auto counts = balanced_counts(n, 2);
  Tensor x({n, 2});
  std::vector<int> y(n);
  std::size_t row = 0;
  for (std::size_t i = 0; i < counts[0]; ++i, ++row) {
    const double t = linspace_at(i, counts[0], 0.0, std::numbers::pi);
    x.at(row, 0) = std::cos(t);
    x.at(row, 1) = std::sin(t);
    y[row] = 0;
  }
  for (std::size_t i = 0; i < counts[1]; ++i, ++row) {
    const double t = linspace_at(i, counts[1], 0.0, std::numbers::pi);
    x.at(row, 0) = 1.0 - std::cos(t);
    x.at(row, 1) = 0.5 - std::sin(t);
    y[row] = 1;
  }
  add_noise(x, noise, seed);
  return Batch{std::move(x), std::move(y)};
}

Batch make_gaussian_blobs(std::size_t n, int classes, double noise, std::uint64_t seed) {
  constexpr double kRadius = 4.0;
  const auto counts = balanced_counts(n, classes);
  Tensor x({n, 2});
  std::vector<int> y(n);
  std::size_t row = 0;
  for (int k = 0; k < classes; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / classes;
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(k)]; ++i, ++row) {
      x.at(row, 0) = kRadius * std::cos(phi);
      x.at(row, 1) = kRadius * std::sin(phi);
      y[row] = k;
    }
  }
  add_noise(x, noise, seed);
  return Batch{std::move(x), std::move(y)};
}

Batch make_spirals(std::size_t n, int classes, double noise, std::uint64_t seed) {
  const auto counts = balanced_counts(n, classes);
  Tensor x({n, 2});
  std::vector<int> y(n);
  std::size_t row = 0;
  for (int k = 0; k < classes; ++k) {
    const double phase = 2.0 * std::numbers::pi * k / classes;
    const std::size_t c = counts[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < c; ++i, ++row) {
      const double t = linspace_at(i, c, 0.05, 1.0);
      const double angle = 3.0 * std::numbers::pi * t + phase;
      x.at(row, 0) = t * std::cos(angle);
      x.at(row, 1) = t * std::sin(angle);
      y[row] = k;
    }
  }
  add_noise(x, noise, seed);
  return Batch{std::move(x), std::move(y)};
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Batch all;
  int classes = spec.classes;
  switch (spec.kind) {
    case DatasetKind::kTwoMoons:
      all = make_two_moons(spec.size, spec.noise, spec.seed);
      classes = 2;
      break;
    case DatasetKind::kGaussianBlobs:
      all = make_gaussian_blobs(spec.size, spec.classes, spec.noise, spec.seed);
      break;
    case DatasetKind::kSpirals:
      all = make_spirals(spec.size, spec.classes, spec.noise, spec.seed);
      break;
    case DatasetKind::kIdxFiles: {
      IdxArray images = read_idx(spec.images_path);
      IdxArray labels = read_idx(spec.labels_path);
      if (labels.data.rank() != 1) throw IoError("IDX label file must be one-dimensional");
      const std::size_t records = images.data.dim(0);
      if (records != labels.data.size()) {
        throw IoError("IDX image and label record counts differ");
      }
      const std::size_t n = spec.size == 0 ? records : std::min(spec.size, records);
      const std::size_t d = images.data.size() / records;
      const double norm = images.type_code == 0x08 ? 1.0 / 255.0 : 1.0;
      std::vector<double> rows(images.data.values().begin(),
                               images.data.values().begin() + static_cast<std::ptrdiff_t>(n * d));
      for (double& v : rows) v *= norm;
      std::vector<int> labs(n);
      int max_label = 0;
      for (std::size_t i = 0; i < n; ++i) {
        labs[i] = static_cast<int>(labels.data[i]);
        if (labs[i] < 0) throw IoError("negative IDX label");
        max_label = std::max(max_label, labs[i]);
      }
      all = Batch{Tensor({n, d}, std::move(rows)), std::move(labs)};
      classes = std::max(2, max_label + 1);
      break;
    }
  }

  const std::size_t n = all.size();
  if (n < 2) throw ConfigError("need at least two samples to split");
  Rng rng(mix_seed(spec.seed, kSplitStream));
  const auto order = shuffled_range(n, rng);
  auto n_train = static_cast<std::size_t>(std::llround(spec.split * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return Dataset{all.select(train_idx), all.select(test_idx), classes};
}

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw IoError("IDX header truncated");
  if (bytes[0] != 0 || bytes[1] != 0) throw IoError("IDX magic must start with two zero bytes");
  const std::uint8_t type = bytes[2];
  const std::size_t ndims = bytes[3];
  const std::size_t elem = idx_element_size(type);
  if (ndims == 0) throw IoError("IDX file declares zero dimensions");
  if (bytes.size() < 4 + 4 * ndims) throw IoError("IDX dimension table truncated");
  Shape shape(ndims);
  for (std::size_t i = 0; i < ndims; ++i) {
    shape[i] = read_be32(bytes, 4 + 4 * i);
    if (shape[i] == 0) throw IoError("IDX dimension of extent zero");
  }
  const std::size_t count = shape_size(shape);
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() != header + count * elem) {
    throw IoError("IDX payload has " + std::to_string(bytes.size() - header) + " bytes, expected " +
                  std::to_string(count * elem));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = idx_element(&bytes[header + i * elem], type);
  return IdxArray{type, Tensor(std::move(shape), std::move(values))};
}

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

void write_idx_u8(const std::filesystem::path& path, const Tensor& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write IDX file " + path.string());
  std::vector<std::uint8_t> bytes{0, 0, 0x08, static_cast<std::uint8_t>(data.rank())};
  for (std::size_t d : data.shape()) {
    const auto u = static_cast<std::uint32_t>(d);
    bytes.insert(bytes.end(), {static_cast<std::uint8_t>(u >> 24), static_cast<std::uint8_t>(u >> 16),
                               static_cast<std::uint8_t>(u >> 8), static_cast<std::uint8_t>(u)});
  }
  for (double v : data.values()) {
    bytes.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (batch_size > n) throw ConfigError("batch size exceeds dataset size");
  Rng rng(mix_seed(epoch_seed, kShuffleStream));
  const auto order = shuffled_range(n, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

std::vector<Batch> batch_iter(const Batch& data, std::size_t batch_size,
                              std::uint64_t epoch_seed) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(data.size(), batch_size, epoch_seed)) {
    out.push_back(data.select(idx));
  }
  return out;
}

}  // namespace gnp
