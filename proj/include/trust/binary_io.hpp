#pragma once

// Little-endian primitives and length-prefixed JSON headers shared by the
// checkpoint and dataset file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trust/error.hpp"

namespace trust::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename UInt>
inline void put_uint(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

inline void put_double(std::string& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_doubles(std::string& out, std::span<const double> vs) {
  for (double v : vs) put_double(out, v);
}

/// u64 little-endian byte length, then the UTF-8 JSON text.
inline void put_json_header(std::string& out, const nlohmann::json& header) {
  const std::string text = header.dump();
  put_uint<std::uint64_t>(out, text.size());
  out += text;
}

/// Bounds-checked cursor over an in-memory byte buffer.
class Reader {
 public:
  explicit Reader(std::span<const char> bytes) : bytes_(bytes) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

  std::span<const char> take(std::size_t n) {
    if (n > remaining()) {
      throw FormatError("unexpected end of data: need " + std::to_string(n) + " bytes, have " +
                        std::to_string(remaining()));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename UInt>
  UInt get_uint() {
    auto s = take(sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      v |= static_cast<UInt>(static_cast<unsigned char>(s[i])) << (8 * i);
    }
    return v;
  }

  double get_double() { return std::bit_cast<double>(get_uint<std::uint64_t>()); }

  nlohmann::json get_json_header() {
    const auto len = get_uint<std::uint64_t>();
    if (len > remaining()) throw FormatError("JSON header length exceeds file size");
    auto s = take(static_cast<std::size_t>(len));
    try {
      return nlohmann::json::parse(s.begin(), s.end());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed JSON header: ") + e.what());
    }
  }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path);
  return bytes;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace trust::io
