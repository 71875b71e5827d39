#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mvsd/records.hpp"
#include "mvsd/tensor.hpp"

namespace mvsd::bin {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t x) { bytes(&x, 1); }
  void u32(std::uint32_t x) { bytes(&x, 4); }
  void u64(std::uint64_t x) { bytes(&x, 8); }
  void f64(double x) { bytes(&x, 8); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void tensor(const Tensor& t);
  const std::string& buffer() const { return buf_; }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked reader; every overrun throws DataError("truncated ...").
class Reader {
 public:
  Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}
  void bytes(void* p, std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Tensor tensor();
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string read_file(const std::filesystem::path& file);
/// Writes via a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& file, std::string_view data);

}  // namespace mvsd::bin
