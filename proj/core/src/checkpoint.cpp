#include "stymam/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace stymam {

const char* to_string(CheckpointErrorKind kind) {
  switch (kind) {
    case CheckpointErrorKind::Io: return "io";
    case CheckpointErrorKind::MagicMismatch: return "magic-mismatch";
    case CheckpointErrorKind::Truncated: return "truncated";
    case CheckpointErrorKind::ShapeMismatch: return "shape-mismatch";
    case CheckpointErrorKind::MissingTensor: return "missing-tensor";
    case CheckpointErrorKind::UnexpectedTensor: return "unexpected-tensor";
  }
  return "unknown";
}

namespace {

template <class T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  template <class T>
  T get_le() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

  void need(std::size_t n) const {
    if (n > bytes_.size() || pos_ > bytes_.size() - n) {
      throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint " + path_.string() + " is truncated");
    }
  }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ParamList& params, const std::filesystem::path& path) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint64_t>(out, params.size());
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto e : p.tensor.shape()) put_le<std::uint64_t>(out, e);
    put_le<std::uint64_t>(out, offset);
    offset += p.tensor.numel() * sizeof(double);
  }
  for (const auto& p : params) {
    for (Real v : p.tensor.data()) put_le<double>(out, static_cast<double>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError(CheckpointErrorKind::Io, "failed writing " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointErrorKind::Io, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path);
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError(CheckpointErrorKind::MagicMismatch, "checkpoint " + path.string() + " has a bad magic string");
  }
  r.seek(sizeof(kCheckpointMagic));
  const auto count = r.get_le<std::uint64_t>();
  struct Header {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Header> headers;
  for (std::uint64_t i = 0; i < count; ++i) {
    Header h;
    h.name = r.get_bytes(r.get_le<std::uint32_t>());
    const auto rank = r.get_le<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) h.shape.push_back(static_cast<std::size_t>(r.get_le<std::uint64_t>()));
    h.offset = r.get_le<std::uint64_t>();
    headers.push_back(std::move(h));
  }
  const std::size_t payload = r.pos();
  std::vector<CheckpointEntry> entries;
  entries.reserve(headers.size());
  for (auto& h : headers) {
    CheckpointEntry e{std::move(h.name), std::move(h.shape), {}};
    const std::size_t n = shape_numel(e.shape);
    if (h.offset > bytes.size()) throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint " + path.string() + " is truncated");
    r.seek(payload + static_cast<std::size_t>(h.offset));
    e.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) e.values.push_back(static_cast<Real>(r.get_le<double>()));
    entries.push_back(std::move(e));
  }
  return entries;
}

void load_checkpoint(const std::filesystem::path& path, const ParamList& params, bool allow_extra) {
  const auto entries = read_checkpoint(path);
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name.emplace(e.name, &e);
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw CheckpointError(CheckpointErrorKind::MissingTensor, "checkpoint " + path.string() + " lacks tensor " + p.name);
    }
    if (it->second->shape != p.tensor.shape()) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "tensor " + p.name + " has shape " + shape_str(it->second->shape) + " in checkpoint, expected " +
                                shape_str(p.tensor.shape()));
    }
  }
  if (!allow_extra && entries.size() != params.size()) {
    std::unordered_map<std::string, bool> expected;
    for (const auto& p : params) expected[p.name] = true;
    for (const auto& e : entries) {
      if (!expected.count(e.name)) {
        throw CheckpointError(CheckpointErrorKind::UnexpectedTensor, "checkpoint " + path.string() + " has unexpected tensor " + e.name);
      }
    }
  }
  for (const auto& p : params) {
    const auto& values = by_name.at(p.name)->values;
    Tensor t = p.tensor;
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
}

}  // namespace stymam
