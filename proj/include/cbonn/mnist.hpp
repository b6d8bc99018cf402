#pragma once

// IDX reader/writer for the MNIST image and label files (big-endian headers).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbonn/dataset.hpp"

namespace cbonn {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

class IdxError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, Truncated, CountMismatch, BadLabel, BadSubset };

  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

IdxImages read_idx_images(const std::filesystem::path& path);
IdxLabels read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, const IdxLabels& labels);

/// First `subset` records as a 10-class dataset with pixels scaled by 1/255.
/// subset == 0 loads every record.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, std::size_t subset);

}  // namespace cbonn
