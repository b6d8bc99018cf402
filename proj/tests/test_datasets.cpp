#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cbonn/datasets.hpp"
#include "cbonn/mnist.hpp"
#include "support.hpp"

using namespace cbonn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cbonn_test_datasets";
  fs::create_directories(dir);
  return dir / name;
}

IdxImages two_images() {
  IdxImages img;
  img.count = 2;
  img.rows = 3;
  img.cols = 2;
  img.pixels = {0, 1, 2, 127, 128, 255, 9, 8, 7, 6, 5, 4};
  return img;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("sine targets follow sin(2 pi x) without noise") {
  const auto d = gen_sine(200, 0.0, 3);
  CHECK(d.size() == 200);
  for (std::size_t s = 0; s < d.size(); ++s) {
    CHECK(d.inputs[s] >= 0.0);
    CHECK(d.inputs[s] < 1.0);
    CHECK(d.targets[s] == std::sin(2 * std::numbers::pi * d.inputs[s]));
  }
  CHECK(std::sin(2 * std::numbers::pi * 0.25) == 1.0);
}

TEST_CASE("full-size generators") {
  const auto sine = gen_sine(8000, 0.01, 1);
  CHECK(sine.size() == 8000);
  const auto sq = gen_square(5000, 0.01, 1);
  CHECK(sq.size() == 5000);
  CHECK_NOTHROW(sine.validate());
}

TEST_CASE("sine sample mean is within the Monte-Carlo bound") {
  const std::size_t n = 100000;
  const auto d = gen_sine(n, 0.0, 11);
  double mean = 0.0;
  for (double y : d.targets) mean += y;
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)) * std::sqrt(0.5));
}

TEST_CASE("square targets and their mean") {
  const auto d = gen_square(5000, 0.0, 5);
  double mean = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < d.size(); ++s) {
    CHECK(d.targets[s] == d.inputs[s] * d.inputs[s]);
    mean += d.targets[s];
    sq += d.targets[s] * d.targets[s];
  }
  mean /= 5000.0;
  const double sd = std::sqrt(sq / 5000.0 - mean * mean);
  CHECK(std::abs(mean - 1.0 / 3.0) <= 3 * sd / std::sqrt(5000.0));
}

TEST_CASE("generators reject bad arguments") {
  CHECK_THROWS(gen_sine(0, 0.0, 1));
  CHECK_THROWS(gen_square(10, -1.0, 1));
  CHECK_THROWS(gen_shifted_sines(1, 10, 1));
}

TEST_CASE("shifted sines") {
  SUBCASE("hundred tasks span [-1, 1]") {
    const auto t = gen_shifted_sines(100, 50, 2);
    REQUIRE(t.size() == 100);
    CHECK(t.shifts.front() == -1.0);
    CHECK(t.shifts.back() == 1.0);
    CHECK(t.shifts[49] == doctest::Approx(-1.0 + 98.0 / 99.0).epsilon(1e-15));
    CHECK(t.shifts[49] == doctest::Approx(-0.010101).epsilon(1e-4));
    double worst = 0.0;
    for (std::size_t p = 0; p < 100; ++p)
      worst = std::max(worst, std::abs(t.shifts[p] - (-1.0 + 2.0 * static_cast<double>(p) / 99.0)));
    CHECK(worst == 0.0);
  }
  SUBCASE("three tasks") {
    const auto t = gen_shifted_sines(3, 20, 2);
    CHECK(t.shifts == std::vector<double>{-1.0, 0.0, 1.0});
    for (std::size_t s = 0; s < 20; ++s) {
      CHECK(t.tasks[0].inputs[s] == t.tasks[2].inputs[s]);
      CHECK(t.tasks[1].targets[s] == std::sin(2 * std::numbers::pi * t.tasks[1].inputs[s]));
      CHECK(t.tasks[2].targets[s] == t.tasks[1].targets[s] + 1.0);
    }
  }
}

TEST_CASE("minibatch sampler") {
  SUBCASE("a full-size batch is a permutation") {
    MinibatchSampler s(50, 50, 4);
    auto b = s.next_batch();
    std::vector<std::size_t> v(b.begin(), b.end());
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(v[i] == i);
  }
  SUBCASE("8000 samples in batches of 800 give ten batches per epoch") {
    MinibatchSampler s(8000, 800, 4);
    CHECK(s.batches_per_epoch() == 10);
  }
  SUBCASE("the short final batch is kept") {
    MinibatchSampler s(10, 4, 4);
    CHECK(s.batches_per_epoch() == 3);
    CHECK(s.next_batch().size() == 4);
    CHECK(s.next_batch().size() == 4);
    CHECK(s.next_batch().size() == 2);
    CHECK(s.epochs_started() == 1);
    CHECK(s.next_batch().size() == 4);
    CHECK(s.epochs_started() == 2);
  }
  SUBCASE("equal seeds replay, different seeds differ") {
    MinibatchSampler a(100, 30, 9), b(100, 30, 9), c(100, 30, 10);
    bool differs = false;
    for (int k = 0; k < 12; ++k) {
      auto x = a.next_batch();
      auto y = b.next_batch();
      auto z = c.next_batch();
      CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
      differs = differs || !std::equal(x.begin(), x.end(), z.begin(), z.end());
    }
    CHECK(differs);
  }
  SUBCASE("bad batch sizes") {
    CHECK_THROWS(MinibatchSampler(10, 0, 1));
    CHECK_THROWS(MinibatchSampler(10, 11, 1));
  }
}

TEST_CASE("property: every epoch covers each index exactly once") {
  for (std::uint64_t i = 0; i < 40; ++i) {
    auto rng = testing::fixture(i);
    const std::size_t n = testing::pick(rng, 1, 300);
    const std::size_t b = testing::pick(rng, 1, n);
    MinibatchSampler s(n, b, i);
    for (int epoch = 0; epoch < 3; ++epoch) {
      std::vector<int> seen(n, 0);
      for (std::size_t k = 0; k < s.batches_per_epoch(); ++k)
        for (std::size_t idx : s.next_batch()) ++seen[idx];
      CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
  }
}

TEST_CASE("property: generators are deterministic in the seed") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = gen_sine(300, 0.01, seed);
    const auto b = gen_sine(300, 0.01, seed);
    CHECK(a.inputs == b.inputs);
    CHECK(a.targets == b.targets);
  }
  CHECK(gen_sine(10, 0.01, 1).inputs != gen_sine(10, 0.01, 2).inputs);
}

TEST_CASE("IDX round trip is bit exact") {
  const auto img_path = scratch("rt-images");
  const auto lab_path = scratch("rt-labels");
  const IdxImages img = two_images();
  write_idx_images(img_path, img);
  write_idx_labels(lab_path, IdxLabels{{3, 9}});
  const auto back = read_idx_images(img_path);
  CHECK(back.count == 2);
  CHECK(back.rows == 3);
  CHECK(back.cols == 2);
  CHECK(back.pixels == img.pixels);
  CHECK(read_idx_labels(lab_path).labels == std::vector<std::uint8_t>{3, 9});

  const auto bytes = read_bytes(img_path);
  REQUIRE(bytes.size() == 16 + 12);
  CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4) == std::vector<std::uint8_t>{0, 0, 8, 3});

  const auto d = load_mnist_idx(img_path, lab_path, 0);
  CHECK(d.size() == 2);
  CHECK(d.input_dim == 6);
  CHECK(d.inputs[5] == 1.0);
  CHECK(d.inputs[0] == 0.0);
  CHECK(d.labels == std::vector<std::uint32_t>{3, 9});
  CHECK(load_mnist_idx(img_path, lab_path, 1).size() == 1);
}

TEST_CASE("IDX header with MNIST dimensions is accepted") {
  IdxImages img;
  img.count = 3;
  img.rows = 28;
  img.cols = 28;
  img.pixels.assign(3 * 784, 17);
  const auto ip = scratch("full-images");
  const auto lp = scratch("full-labels");
  write_idx_images(ip, img);
  write_idx_labels(lp, IdxLabels{{0, 1, 2}});
  const auto d = load_mnist_idx(ip, lp, 0);
  CHECK(d.input_dim == 784);
  CHECK(d.output_dim == 10);
  for (double v : d.inputs) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("corrupted IDX files are rejected") {
  const auto ip = scratch("bad-images");
  const auto lp = scratch("bad-labels");
  write_idx_images(ip, two_images());
  write_idx_labels(lp, IdxLabels{{1, 2}});
  auto bytes = read_bytes(ip);

  auto kind_of = [&](auto&& fn) {
    try {
      fn();
    } catch (const IdxError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };

  SUBCASE("bad magic") {
    auto b = bytes;
    b[3] = 0x01;
    write_bytes(ip, b);
    CHECK(kind_of([&] { read_idx_images(ip); }) == static_cast<int>(IdxError::Kind::BadMagic));
  }
  SUBCASE("labels read as images") {
    CHECK(kind_of([&] { read_idx_images(lp); }) == static_cast<int>(IdxError::Kind::BadMagic));
  }
  SUBCASE("truncated pixels") {
    auto b = bytes;
    b.resize(b.size() - 1);
    write_bytes(ip, b);
    CHECK(kind_of([&] { read_idx_images(ip); }) == static_cast<int>(IdxError::Kind::Truncated));
  }
  SUBCASE("truncated header") {
    write_bytes(ip, {0, 0, 8});
    CHECK(kind_of([&] { read_idx_images(ip); }) == static_cast<int>(IdxError::Kind::Truncated));
  }
  SUBCASE("count mismatch between files") {
    write_idx_labels(lp, IdxLabels{{1, 2, 3}});
    CHECK(kind_of([&] { load_mnist_idx(ip, lp, 0); }) == static_cast<int>(IdxError::Kind::CountMismatch));
  }
  SUBCASE("label out of range") {
    write_idx_labels(lp, IdxLabels{{1, 12}});
    CHECK(kind_of([&] { load_mnist_idx(ip, lp, 0); }) == static_cast<int>(IdxError::Kind::BadLabel));
  }
  SUBCASE("subset too large") {
    CHECK(kind_of([&] { load_mnist_idx(ip, lp, 3); }) == static_cast<int>(IdxError::Kind::BadSubset));
  }
  SUBCASE("missing file") {
    CHECK(kind_of([&] { read_idx_images(scratch("does-not-exist")); }) == static_cast<int>(IdxError::Kind::Io));
  }
}
