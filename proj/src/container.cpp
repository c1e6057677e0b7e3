#include "imcs/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "imcs/errors.hpp"

namespace imcs {

namespace {

constexpr std::array<char, 4> kMagic = {'I', 'M', 'C', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

const std::array<std::uint32_t, 256>& crc_table() {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

// Byte sink that updates the checksum as it writes.
struct Writer {
  std::ofstream out;
  std::uint32_t crc = 0;

  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    crc = crc32(static_cast<const unsigned char*>(p), n, crc);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    bytes(b, 2);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct Reader {
  std::vector<unsigned char> buf;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw IoError(path + ": container truncated");
  }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(buf[pos]) |
                      static_cast<std::uint16_t>(buf[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t crc) {
  const auto& t = crc_table();
  std::uint32_t c = crc ^ 0xffffffffu;
  for (std::size_t i = 0; i < len; ++i) c = t[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

void write_container(const std::string& path, const std::vector<NamedArray>& arrays) {
  Writer w;
  w.out.open(path, std::ios::binary | std::ios::trunc);
  if (!w.out) throw IoError(path + ": cannot open for writing");

  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (a.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw IoError(path + ": array name too long: " + a.name);
    w.u16(static_cast<std::uint16_t>(a.name.size()));
    w.bytes(a.name.data(), a.name.size());
    w.u8(kDtypeF64);
    w.u8(2);
    w.u64(a.data.rows());
    w.u64(a.data.cols());
    for (std::size_t i = 0; i < a.data.size(); ++i) w.f64(a.data.data()[i]);
  }
  const std::uint32_t crc = w.crc;
  w.u32(crc);
  w.out.close();
  if (!w.out) throw IoError(path + ": write failed");
}

std::vector<NamedArray> read_container(const std::string& path) {
  Reader r;
  r.path = path;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading");
    in.seekg(0, std::ios::end);
    const auto len = in.tellg();
    in.seekg(0, std::ios::beg);
    r.buf.resize(static_cast<std::size_t>(len));
    in.read(reinterpret_cast<char*>(r.buf.data()), len);
    if (!in) throw IoError(path + ": read failed");
  }

  if (r.buf.size() < kMagic.size() + 4 + 4 + 4)
    throw IoError(path + ": container truncated");
  if (std::memcmp(r.buf.data(), kMagic.data(), kMagic.size()) != 0)
    throw IoError(path + ": bad magic, not a container file");

  const std::uint32_t stored_crc = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(r.buf[r.buf.size() - 4 + i]) << (8 * i);
    return v;
  }();
  if (crc32(r.buf.data(), r.buf.size() - 4) != stored_crc)
    throw IoError(path + ": checksum mismatch");

  r.pos = kMagic.size();
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError(path + ": unsupported container version " + std::to_string(version));

  const std::uint32_t count = r.u32();
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  const std::size_t payload_end = r.buf.size() - 4;
  for (std::uint32_t idx = 0; idx < count; ++idx) {
    const std::uint16_t name_len = r.u16();
    r.need(name_len);
    std::string name(reinterpret_cast<const char*>(r.buf.data() + r.pos), name_len);
    r.pos += name_len;
    const std::uint8_t dtype = r.u8();
    if (dtype != kDtypeF64)
      throw IoError(path + ": unknown dtype " + std::to_string(dtype) +
                    " for array " + name);
    const std::uint8_t rank = r.u8();
    if (rank != 1 && rank != 2)
      throw IoError(path + ": unsupported rank " + std::to_string(rank) +
                    " for array " + name);
    std::uint64_t rows = 1, cols;
    if (rank == 2) {
      rows = r.u64();
      cols = r.u64();
    } else {
      cols = r.u64();
    }
    const std::uint64_t n = rows * cols;
    if (cols != 0 && n / cols != rows)
      throw IoError(path + ": dimension overflow for array " + name);
    if (r.pos > payload_end || n > (payload_end - r.pos) / 8)
      throw IoError(path + ": container truncated");
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    arrays.push_back({std::move(name), std::move(m)});
  }
  if (r.pos != payload_end)
    throw IoError(path + ": trailing bytes after last array");
  return arrays;
}

}  // namespace imcs
