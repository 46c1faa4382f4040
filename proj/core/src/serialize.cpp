#include "ctta/serialize.hpp"

#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace ctta::io {

void BinaryWriter::u8(std::uint8_t x) {
  out_.write(reinterpret_cast<const char*>(&x), 1);
}

void BinaryWriter::u32(std::uint32_t x) {
  out_.write(reinterpret_cast<const char*>(&x), 4);
}

void BinaryWriter::u64(std::uint64_t x) {
  out_.write(reinterpret_cast<const char*>(&x), 8);
}

void BinaryWriter::i64(std::int64_t x) {
  out_.write(reinterpret_cast<const char*>(&x), 8);
}

void BinaryWriter::f64(double x) {
  out_.write(reinterpret_cast<const char*>(&x), 8);
}

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::matrix(const nn::Matrix& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  out_.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void BinaryWriter::params(const nn::ParamSet& p) {
  u32(static_cast<std::uint32_t>(p.arrays.size()));
  for (const auto& a : p.arrays) {
    str(a.name);
    matrix(a.value);
  }
}

void BinaryReader::raw(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw IoError("unexpected end of binary stream");
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t x;
  raw(&x, 1);
  return x;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t x;
  raw(&x, 4);
  return x;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t x;
  raw(&x, 8);
  return x;
}

std::int64_t BinaryReader::i64() {
  std::int64_t x;
  raw(&x, 8);
  return x;
}

double BinaryReader::f64() {
  double x;
  raw(&x, 8);
  return x;
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  if (n > (1u << 20)) throw IoError("implausible string length");
  std::string s(n, '\0');
  if (n) raw(s.data(), n);
  return s;
}

nn::Matrix BinaryReader::matrix() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (rows > (1u << 24) || cols > (1u << 24))
    throw IoError("implausible matrix shape");
  nn::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (m.size())
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return m;
}

nn::ParamSet BinaryReader::params() {
  const std::uint32_t n = u32();
  if (n > (1u << 16)) throw IoError("implausible array count");
  nn::ParamSet p;
  p.arrays.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = str();
    nn::Matrix m = matrix();
    p.arrays.push_back({std::move(name), std::move(m)});
  }
  return p;
}

}  // namespace ctta::io
