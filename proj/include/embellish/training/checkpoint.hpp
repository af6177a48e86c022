#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/io.hpp"
#include "embellish/neural/model.hpp"
#include "embellish/random.hpp"
#include "embellish/training/config.hpp"

namespace embellish::training {

// Binary layout (host byte order):
//   magic "EMBLCKPT", u32 version, u32 scalar width in bytes,
//   u64 vocabulary hash, u32 completed epochs,
//   string settings ("key = value" lines), string rng state,
//   u32 parameter count, then per parameter:
//     string name, u64 rows, u64 cols, rows*cols raw scalars.
// Strings are a u64 length followed by the bytes.

inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'B', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Progress needed to resume training exactly.
struct TrainState {
  int completed_epochs = 0;
  std::string rng_state;  // dropout engine
};

template <typename Scalar>
struct Checkpoint {
  neural::Model<Scalar> model;
  Settings settings;
  std::uint64_t vocab_hash = 0;
  TrainState state;
};

namespace detail {

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void bytes(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf_ += s;
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string origin) : buf_(buf), origin_(std::move(origin)) {}

  template <typename T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw DataError(origin_ + ": checkpoint is truncated");
  }
  const std::string& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Writes the checkpoint via a temporary file and an atomic rename.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const neural::Model<Scalar>& model, const Settings& settings,
                     std::uint64_t vocab_hash, const TrainState& state = {}) {
  detail::Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint32_t>(sizeof(Scalar));
  w.pod<std::uint64_t>(vocab_hash);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(state.completed_epochs));
  Settings s = settings;
  s.model = model.config;
  std::string text;
  for (const auto& line : format_settings(s)) text += line + "\n";
  w.str(text);
  w.str(state.rng_state);
  const auto params = model.parameters();
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(p->value.rows()));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(p->value.cols()));
    w.bytes(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(Scalar));
  }
  io::write_file_atomic(path, w.buffer());
}

/// Reads the scalar width recorded in a checkpoint (4 or 8).
inline std::uint32_t checkpoint_scalar_width(const std::filesystem::path& path) {
  const auto buf = io::read_file(path);
  detail::Reader r(buf, path.string());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError(path.string() + ": not a checkpoint file");
  r.pod<std::uint32_t>();
  return r.pod<std::uint32_t>();
}

/// Loads a checkpoint. When `expected_vocab_hash` is given, a checkpoint
/// trained against a different vocabulary is refused.
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path,
                                   std::optional<std::uint64_t> expected_vocab_hash = std::nullopt) {
  const auto buf = io::read_file(path);
  detail::Reader r(buf, path.string());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError(path.string() + ": not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto width = r.pod<std::uint32_t>();
  if (width != sizeof(Scalar))
    throw DataError(path.string() + ": checkpoint stores " + std::to_string(8 * width) + "-bit parameters, expected " +
                    std::to_string(8 * sizeof(Scalar)) + "-bit");
  Checkpoint<Scalar> ck;
  ck.vocab_hash = r.pod<std::uint64_t>();
  if (expected_vocab_hash && *expected_vocab_hash != ck.vocab_hash)
    throw DataError(path.string() + ": vocabulary hash mismatch (checkpoint " + std::to_string(ck.vocab_hash) +
                    ", vocabulary " + std::to_string(*expected_vocab_hash) + "); refusing to load");
  ck.state.completed_epochs = static_cast<int>(r.pod<std::uint32_t>());
  parse_settings(ck.settings, io::split_lines(r.str()), path.string() + " (settings)");
  ck.state.rng_state = r.str();

  ck.model = neural::init_model<Scalar>(ck.settings.model, 0);
  auto params = ck.model.parameters();
  const auto count = r.pod<std::uint32_t>();
  if (count != params.size())
    throw DataError(path.string() + ": checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                    std::to_string(params.size()));
  for (auto* p : params) {
    const auto name = r.str();
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (name != p->name || rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols()))
      throw DataError(path.string() + ": parameter '" + name + "' does not match model layout ('" + p->name + "' " +
                      neural::shape_string(p->value) + ")");
    r.bytes(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(Scalar));
  }
  if (!r.at_end()) throw DataError(path.string() + ": trailing bytes after parameters");
  return ck;
}

}  // namespace embellish::training
