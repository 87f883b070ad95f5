#include "ct3d/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ct3d/errors.hpp"

namespace ct3d::num {

namespace {

constexpr char kMagic[8] = {'C', 'T', '3', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ParamStore& store,
                                               const std::string& metadata) {
  std::vector<std::uint8_t> out(kMagic, kMagic + sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.size()));
  out.insert(out.end(), metadata.begin(), metadata.end());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (ParamId id = 0; id < store.size(); ++id) {
    const std::string& name = store.name(id);
    const Tensor2& v = store.value(id);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint64_t>(out, v.rows());
    put_le<std::uint64_t>(out, v.cols());
    for (double x : v.values()) put_le<double>(out, x);
  }
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw FormatError("checkpoint: bad magic");
  Checkpoint ck;
  ck.version = in.get<std::uint32_t>();
  if (ck.version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(ck.version));
  ck.metadata = in.string(in.get<std::uint32_t>());
  const auto count = in.get<std::uint32_t>();
  ck.params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = in.string(in.get<std::uint32_t>());
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    if (cols != 0 && rows > (bytes.size() / 8) / cols) throw FormatError("checkpoint: bad shape");
    nt.value = Tensor2(rows, cols);
    for (double& x : nt.value.values()) x = in.get<double>();
    ck.params.push_back(std::move(nt));
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& metadata) {
  const auto bytes = serialize_checkpoint(store, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void restore_params(const Checkpoint& ckpt, ParamStore& store) {
  if (ckpt.params.size() != store.size())
    throw FormatError("checkpoint: parameter count does not match model");
  for (ParamId id = 0; id < store.size(); ++id) {
    const NamedTensor& nt = ckpt.params[id];
    if (nt.name != store.name(id) || !nt.value.same_shape(store.value(id)))
      throw FormatError("checkpoint: parameter '" + nt.name + "' does not match model");
    store.value(id) = nt.value;
  }
}

}  // namespace ct3d::num
