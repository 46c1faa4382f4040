#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ctta/errors.hpp"
#include "ctta/net.hpp"

namespace ctta::io {

// Little-endian binary stream helpers used by every checkpoint format.
// Doubles round-trip bit-exactly, which the resume guarantees depend on.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t x);
  void u32(std::uint32_t x);
  void u64(std::uint64_t x);
  void i64(std::int64_t x);
  void f64(double x);
  void str(const std::string& s);
  void matrix(const nn::Matrix& m);
  void params(const nn::ParamSet& p);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str();
  nn::Matrix matrix();
  nn::ParamSet params();

 private:
  void raw(void* dst, std::size_t n);
  std::istream& in_;
};

}  // namespace ctta::io
