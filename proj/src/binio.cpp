#include "mvsd/binio.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

namespace mvsd::bin {

void Writer::tensor(const Tensor& t) {
  u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) u64(d);
  const auto data = t.data();
  bytes(data.data(), data.size() * sizeof(double));
}

void Reader::bytes(void* p, std::size_t n) {
  if (n > remaining()) throw DataError("truncated " + what_);
  std::memcpy(p, data_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t Reader::u8() {
  std::uint8_t x;
  bytes(&x, 1);
  return x;
}

std::uint32_t Reader::u32() {
  std::uint32_t x;
  bytes(&x, 4);
  return x;
}

std::uint64_t Reader::u64() {
  std::uint64_t x;
  bytes(&x, 8);
  return x;
}

double Reader::f64() {
  double x;
  bytes(&x, 8);
  return x;
}

std::string Reader::str() {
  const std::uint64_t n = u64();
  if (n > remaining()) throw DataError("truncated " + what_);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

Tensor Reader::tensor() {
  const std::uint32_t rank = u32();
  if (rank > 8) throw DataError("corrupt tensor rank in " + what_);
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = u64();
    if (d != 0 && count > remaining() / d) throw DataError("truncated " + what_);
    count *= d;
  }
  if (count * sizeof(double) > remaining()) throw DataError("truncated " + what_);
  std::vector<double> data(count);
  bytes(data.data(), count * sizeof(double));
  return Tensor(std::move(shape), std::move(data));
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& file, std::string_view data) {
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace mvsd::bin
