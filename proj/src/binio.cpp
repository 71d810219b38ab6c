#include "lamward/binio.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lamward/error.hpp"

namespace lamward {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

void BinaryWriter::u32(std::uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::tensor(const Tensor& t) {
  u64(t.rows());
  u64(t.cols());
  buf_.append(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(double));
}

void BinaryWriter::f64s(const std::vector<double>& v) {
  u64(v.size());
  buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

void BinaryReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw FormatError("truncated container");
}

std::string BinaryReader::bytes(std::size_t n) {
  need(n);
  std::string out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

std::string BinaryReader::str() { return bytes(u32()); }

Tensor BinaryReader::tensor() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (cols != 0 && rows > (data_.size() - pos_) / sizeof(double) / cols) throw FormatError("truncated tensor");
  std::vector<double> v(rows * cols);
  need(v.size() * sizeof(double));
  std::memcpy(v.data(), data_.data() + pos_, v.size() * sizeof(double));
  pos_ += v.size() * sizeof(double);
  return Tensor(rows, cols, std::move(v));
}

std::vector<double> BinaryReader::f64s() {
  const std::uint64_t n = u64();
  if (n > (data_.size() - pos_) / sizeof(double)) throw FormatError("truncated array");
  std::vector<double> v(n);
  std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
  pos_ += n * sizeof(double);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace lamward
