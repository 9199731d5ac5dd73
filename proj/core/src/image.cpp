#include "stymam/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stymam/errors.hpp"

namespace stymam {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

void write_pnm(const Image& img, const std::filesystem::path& path, const char* magic) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << magic << '\n' << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

Image read_pnm(const std::filesystem::path& path, bool force_rgb) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string magic = header_token(in);
  if (magic != "P6" && magic != "P5") throw DataError(path.string() + ": only binary P5/P6 images are supported");
  Image img;
  try {
    img.width = std::stoul(header_token(in));
    img.height = std::stoul(header_token(in));
    if (std::stoul(header_token(in)) != 255) throw DataError(path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw DataError(path.string() + ": malformed PNM header");
  }
  if (img.width == 0 || img.height == 0) throw DataError(path.string() + ": empty image");
  img.channels = magic == "P6" ? 3 : 1;
  img.pixels.resize(img.width * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw DataError(path.string() + ": truncated pixel data");
  if (force_rgb && img.channels == 1) {
    std::vector<std::uint8_t> rgb;
    rgb.reserve(img.pixels.size() * 3);
    for (auto p : img.pixels) rgb.insert(rgb.end(), {p, p, p});
    img.pixels = std::move(rgb);
    img.channels = 3;
  }
  return img;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 3) throw DimensionError("write_ppm needs a 3-channel image");
  write_pnm(img, path, "P6");
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1) throw DimensionError("write_pgm needs a 1-channel image");
  write_pnm(img, path, "P5");
}

Tensor image_to_tensor(const Image& img) {
  if (img.channels != 3) throw DimensionError("image_to_tensor needs RGB");
  std::vector<Real> v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Real>(img.pixels[i]) / 127.5 - 1.0;
  return Tensor::from({img.height, img.width, 3}, std::move(v));
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) throw DimensionError("tensor_to_image: expected [H x W x 3], got " + shape_str(t.shape()));
  Image img{t.dim(1), t.dim(0), 3, std::vector<std::uint8_t>(t.numel())};
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const Real v = std::clamp(t[i], -1.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
  }
  return img;
}

Tensor resize_bilinear(const Tensor& img, std::size_t height, std::size_t width) {
  if (img.rank() != 3) throw DimensionError("resize_bilinear: expected [H x W x C]");
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (h == height && w == width) return img.detach();
  std::vector<Real> out(height * width * c);
  auto sample = [](std::size_t dst, std::size_t src_n, std::size_t dst_n, std::size_t& i0, std::size_t& i1, Real& frac) {
    Real pos = (static_cast<Real>(dst) + 0.5) * static_cast<Real>(src_n) / static_cast<Real>(dst_n) - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<Real>(src_n - 1));
    i0 = static_cast<std::size_t>(std::floor(pos));
    i1 = std::min(i0 + 1, src_n - 1);
    frac = pos - static_cast<Real>(i0);
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    Real fy;
    sample(y, h, height, y0, y1, fy);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      Real fx;
      sample(x, w, width, x0, x1, fx);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const Real top = img[(y0 * w + x0) * c + ch] * (1 - fx) + img[(y0 * w + x1) * c + ch] * fx;
        const Real bot = img[(y1 * w + x0) * c + ch] * (1 - fx) + img[(y1 * w + x1) * c + ch] * fx;
        out[(y * width + x) * c + ch] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return Tensor::from({height, width, c}, std::move(out));
}

Tensor pad_to_multiple(const Tensor& img, std::size_t multiple) {
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const std::size_t ph = (h + multiple - 1) / multiple * multiple;
  const std::size_t pw = (w + multiple - 1) / multiple * multiple;
  std::vector<Real> out(ph * pw * c);
  for (std::size_t y = 0; y < ph; ++y)
    for (std::size_t x = 0; x < pw; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out[(y * pw + x) * c + ch] = img[(std::min(y, h - 1) * w + std::min(x, w - 1)) * c + ch];
  return Tensor::from({ph, pw, c}, std::move(out));
}

Tensor crop(const Tensor& img, std::size_t height, std::size_t width) {
  const std::size_t w = img.dim(1), c = img.dim(2);
  if (height > img.dim(0) || width > w) throw DimensionError("crop: target larger than image");
  std::vector<Real> out(height * width * c);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out[(y * width + x) * c + ch] = img[(y * w + x) * c + ch];
  return Tensor::from({height, width, c}, std::move(out));
}

std::vector<Tensor> load_image_dir(const std::filesystem::path& dir, std::size_t size) {
  if (!std::filesystem::is_directory(dir)) throw DataError("image directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("image directory " + dir.string() + " contains no .ppm/.pgm images");
  std::sort(files.begin(), files.end());
  std::vector<Tensor> out;
  for (const auto& f : files) out.push_back(resize_bilinear(image_to_tensor(read_pnm(f)), size, size));
  return out;
}

}  // namespace stymam
