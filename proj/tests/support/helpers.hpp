#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stymam/image.hpp"
#include "stymam/tensor.hpp"

namespace stymam::test {

inline Real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  Real m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

// Smooth structured RGB pattern in (-1, 1); different `k` gives a different image.
inline Tensor synthetic_image(std::size_t size, int k) {
  std::vector<Real> v(size * size * 3);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        v[(r * size + c) * 3 + ch] = 0.8 * std::sin(0.3 * (k + 1) * r + 0.5 * ch + 0.2 * c * (k % 3 + 1)) *
                                     std::cos(0.17 * c * (ch + 1) + k);
      }
    }
  }
  return Tensor::from({size, size, 3}, std::move(v));
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("stymam-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Writes `count` synthetic images as PPM files named img0.ppm, img1.ppm, ...
inline void write_synthetic_dir(const std::filesystem::path& dir, std::size_t size, int count, int offset) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    write_ppm(tensor_to_image(synthetic_image(size, offset + i)), dir / ("img" + std::to_string(i) + ".ppm"));
  }
}

inline std::vector<std::size_t> read_fixture_perm(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::size_t> perm;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::size_t v;
    while (ss >> v) perm.push_back(v);
  }
  return perm;
}

}  // namespace stymam::test
