#include "cbonn/mnist.hpp"

#include <fstream>
#include <iterator>

namespace cbonn {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4)
    throw IdxError(IdxError::Kind::Truncated, path.string() + ": header truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IdxError(IdxError::Kind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IdxError(IdxError::Kind::Io, "write failed for " + path.string());
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != kIdxImagesMagic)
    throw IdxError(IdxError::Kind::BadMagic,
                   path.string() + ": bad image magic " + std::to_string(magic));
  IdxImages img;
  img.count = read_be32(bytes, 4, path);
  img.rows = read_be32(bytes, 8, path);
  img.cols = read_be32(bytes, 12, path);
  const std::size_t payload = std::size_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < payload)
    throw IdxError(IdxError::Kind::Truncated,
                   path.string() + ": expected " + std::to_string(payload) + " pixel bytes, found " +
                       std::to_string(bytes.size() - 16));
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return img;
}

IdxLabels read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != kIdxLabelsMagic)
    throw IdxError(IdxError::Kind::BadMagic,
                   path.string() + ": bad label magic " + std::to_string(magic));
  const std::uint32_t count = read_be32(bytes, 4, path);
  if (bytes.size() - 8 < count)
    throw IdxError(IdxError::Kind::Truncated,
                   path.string() + ": expected " + std::to_string(count) + " labels, found " +
                       std::to_string(bytes.size() - 8));
  IdxLabels out;
  out.labels.assign(bytes.begin() + 8, bytes.begin() + 8 + count);
  return out;
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols)
    throw IdxError(IdxError::Kind::CountMismatch, "pixel buffer does not match header dims");
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + images.pixels.size());
  put_be32(bytes, kIdxImagesMagic);
  put_be32(bytes, images.count);
  put_be32(bytes, images.rows);
  put_be32(bytes, images.cols);
  bytes.insert(bytes.end(), images.pixels.begin(), images.pixels.end());
  write_file(path, bytes);
}

void write_idx_labels(const std::filesystem::path& path, const IdxLabels& labels) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + labels.labels.size());
  put_be32(bytes, kIdxLabelsMagic);
  put_be32(bytes, static_cast<std::uint32_t>(labels.labels.size()));
  bytes.insert(bytes.end(), labels.labels.begin(), labels.labels.end());
  write_file(path, bytes);
}

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, std::size_t subset) {
  const IdxImages img = read_idx_images(images_path);
  const IdxLabels lab = read_idx_labels(labels_path);
  if (lab.labels.size() != img.count)
    throw IdxError(IdxError::Kind::CountMismatch,
                   "image file holds " + std::to_string(img.count) + " records but label file holds " +
                       std::to_string(lab.labels.size()));
  const std::size_t n = subset == 0 ? img.count : subset;
  if (n > img.count)
    throw IdxError(IdxError::Kind::BadSubset, "subset of " + std::to_string(n) +
                                                  " exceeds the " + std::to_string(img.count) +
                                                  " available records");
  const std::size_t d = std::size_t{img.rows} * img.cols;

  Dataset ds;
  ds.name = "mnist";
  ds.input_dim = d;
  ds.output_dim = 10;
  ds.target_kind = TargetKind::ClassIndex;
  ds.inputs.resize(n * d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n * d; ++i) ds.inputs[i] = img.pixels[i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lab.labels[i] > 9)
      throw IdxError(IdxError::Kind::BadLabel,
                     "label " + std::to_string(lab.labels[i]) + " at record " + std::to_string(i));
    ds.labels[i] = lab.labels[i];
  }
  ds.notes.push_back("pixels scaled to [0,1] by 1/255");
  ds.notes.push_back("labels stored 0-based (digit value)");
  return ds;
}

}  // namespace cbonn
