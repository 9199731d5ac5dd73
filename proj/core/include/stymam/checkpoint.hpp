#pragma once

// Binary checkpoint format, all integers and floats little-endian:
//
//   magic      8 bytes  "STYMAM1\0"
//   count      u64
//   manifest   count x { u32 name_len, name bytes, u32 rank, u64 dims[rank], u64 offset }
//   payload    f64 values; `offset` is the byte offset of a tensor's first value
//              relative to the start of the payload
//
// Entries are written in ParamList order, payloads back to back.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "stymam/generator.hpp"

namespace stymam {

enum class CheckpointErrorKind { Io, MagicMismatch, Truncated, ShapeMismatch, MissingTensor, UnexpectedTensor };

const char* to_string(CheckpointErrorKind kind);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'Y', 'M', 'A', 'M', '1', '\0'};

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<Real> values;
};

void save_checkpoint(const ParamList& params, const std::filesystem::path& path);

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

// Copies stored values into `params` after checking that names and shapes
// match exactly. With `allow_extra`, stored tensors not named in `params` are
// ignored (e.g. loading only the generator from a training checkpoint).
// `params` is left untouched on error.
void load_checkpoint(const std::filesystem::path& path, const ParamList& params, bool allow_extra = false);

}  // namespace stymam
