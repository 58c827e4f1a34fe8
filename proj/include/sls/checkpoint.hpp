#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sls/errors.hpp"
#include "sls/net.hpp"

namespace sls {

// SLSN checkpoint, little-endian throughout:
//   "SLSN" | u16 version | u32 in_ch,classes,width,depth,mid_blocks,n_positions
//   | u32 bank_m[n_positions] | u64 param_count | f32 params...
// Parameters follow the network declaration order (position, candidate,
// weight, bias, gamma, beta).
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& origin)
      : bytes_(bytes), origin_(origin) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(raw(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  std::uint64_t u64() { return raw(8); }

  float f32() {
    const auto bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void expect_magic(const char* magic, std::size_t len) {
    if (bytes_.size() < len || std::memcmp(bytes_.data(), magic, len) != 0)
      throw FormatError(origin_ + ": bad magic bytes at offset 0");
    pos_ = len;
  }

  void expect_end() {
    if (pos_ != bytes_.size())
      throw FormatError(origin_ + ": " + std::to_string(bytes_.size() - pos_) +
                        " trailing bytes at offset " + std::to_string(pos_));
  }

  std::size_t offset() const { return pos_; }

 private:
  std::uint64_t raw(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size())
      throw FormatError(origin_ + ": truncated at offset " + std::to_string(pos_) + " (needed " +
                        std::to_string(n) + " bytes)");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
std::string serialize_checkpoint(const StochasticSegNet<T>& net) {
  std::string buf;
  buf += "SLSN";
  detail::put_u16(buf, kCheckpointVersion);
  const auto& t = net.topology();
  detail::put_u32(buf, static_cast<std::uint32_t>(t.in_channels));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.num_classes));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.width));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.depth));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.mid_blocks));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.positions()));
  for (int m : t.bank_m) detail::put_u32(buf, static_cast<std::uint32_t>(m));
  const auto params = net.parameters();
  std::uint64_t count = 0;
  for (const auto& p : params) count += static_cast<std::uint64_t>(p->numel());
  detail::put_u64(buf, count);
  for (const auto& p : params)
    for (const T v : p->data) detail::put_f32(buf, static_cast<float>(v));
  return buf;
}

template <class T>
StochasticSegNet<T> deserialize_checkpoint(const std::string& bytes,
                                           const std::string& origin = "checkpoint") {
  detail::ByteReader r(bytes, origin);
  r.expect_magic("SLSN", 4);
  const auto version = r.u16();
  if (version != kCheckpointVersion)
    throw FormatError(origin + ": unsupported format version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  SegNetTopology topo;
  topo.in_channels = static_cast<int>(r.u32());
  topo.num_classes = static_cast<int>(r.u32());
  topo.width = static_cast<int>(r.u32());
  topo.depth = static_cast<int>(r.u32());
  topo.mid_blocks = static_cast<int>(r.u32());
  const auto n_positions = r.u32();
  if (static_cast<int>(n_positions) != topo.positions())
    throw FormatError(origin + ": position count " + std::to_string(n_positions) +
                      " inconsistent with topology (expected " + std::to_string(topo.positions()) +
                      ")");
  for (std::uint32_t i = 0; i < n_positions; ++i) topo.bank_m.push_back(static_cast<int>(r.u32()));
  topo.validate();

  Rng dummy(0);
  auto net = StochasticSegNet<T>::build(topo, dummy);
  const auto params = net.parameters();
  std::uint64_t expected = 0;
  for (const auto& p : params) expected += static_cast<std::uint64_t>(p->numel());
  const auto stored = r.u64();
  if (stored != expected)
    throw FormatError(origin + ": parameter count " + std::to_string(stored) +
                      " does not match topology (expected " + std::to_string(expected) + ")");
  for (const auto& p : params)
    for (auto& v : p->data) v = static_cast<T>(r.f32());
  r.expect_end();
  return net;
}

template <class T>
void save_checkpoint(const StochasticSegNet<T>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  const std::string bytes = serialize_checkpoint(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

template <class T>
StochasticSegNet<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(bytes, path);
}

}  // namespace sls
