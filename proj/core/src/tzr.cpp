#include "cgate/tzr.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cgate/errors.hpp"

namespace cgate {

namespace {

constexpr char kMagic[4] = {'T', 'Z', 'R', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 |
         static_cast<std::uint32_t>(b[off + 3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() < 1 || t.rank() > Tensor::kMaxRank)
    throw SizeError("TZR supports rank 1..4, got " + std::to_string(t.rank()));
  t.require_finite("write_tensor");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) {
    if (e > UINT32_MAX) throw SizeError("extent does not fit in u32");
    put_u32(out, static_cast<std::uint32_t>(e));
  }
  for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> b) {
  if (b.size() < 4) throw FormatError("truncated magic", b.size());
  for (std::size_t i = 0; i < 4; ++i)
    if (b[i] != static_cast<std::uint8_t>(kMagic[i])) throw FormatError("bad magic", i);
  if (b.size() < 8) throw FormatError("truncated rank", b.size());
  const std::uint32_t rank = get_u32(b, 4);
  if (rank < 1 || rank > Tensor::kMaxRank)
    throw FormatError("rank " + std::to_string(rank) + " outside 1..4", 4);

  Shape shape(rank);
  std::size_t off = 8;
  std::uint64_t volume = 1;
  for (std::uint32_t i = 0; i < rank; ++i, off += 4) {
    if (b.size() < off + 4) throw FormatError("truncated extents", b.size());
    const std::uint32_t e = get_u32(b, off);
    if (e == 0) throw FormatError("zero extent", off);
    shape[i] = e;
    volume *= e;
    if (volume > (std::uint64_t{1} << 40)) throw FormatError("implausible volume", off);
  }
  const std::uint64_t expected = off + 4 * volume;
  if (b.size() != expected) {
    throw FormatError("payload length " + std::to_string(b.size() - off) + " != " +
                          std::to_string(4 * volume),
                      b.size() < expected ? b.size() : expected);
  }

  std::vector<float> data(volume);
  for (std::size_t i = 0; i < volume; ++i, off += 4) {
    data[i] = std::bit_cast<float>(get_u32(b, off));
    if (!std::isfinite(data[i]))
      throw ValidationError("non-finite payload value at byte offset " + std::to_string(off));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string() + ": " + std::strerror(errno));
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace cgate
