#include "ctta/checkpoint.hpp"

#include <fstream>

#include "ctta/serialize.hpp"

namespace ctta::checkpoint {

namespace {
constexpr std::uint64_t kSourceMagic = 0x43545441'53524330ull;  // "CTTASRC0"
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_arch(io::BinaryWriter& w, const nn::NetworkArch& arch) {
  w.u32(static_cast<std::uint32_t>(arch.input_dim));
  w.u32(static_cast<std::uint32_t>(arch.hidden.size()));
  for (int h : arch.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(arch.classes));
  w.u8(arch.activation == nn::Activation::kTanh ? 0 : 1);
  w.u8(arch.with_bias ? 1 : 0);
}

nn::NetworkArch read_arch(io::BinaryReader& r) {
  nn::NetworkArch arch;
  arch.input_dim = static_cast<int>(r.u32());
  const std::uint32_t n = r.u32();
  if (n > 64) throw CheckpointError("implausible hidden layer count");
  arch.hidden.resize(n);
  for (auto& h : arch.hidden) h = static_cast<int>(r.u32());
  arch.classes = static_cast<int>(r.u32());
  arch.activation = r.u8() == 0 ? nn::Activation::kTanh : nn::Activation::kRelu;
  arch.with_bias = r.u8() != 0;
  arch.validate();
  return arch;
}

void save_source(const std::string& path, const SourceCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  io::BinaryWriter w(out);
  w.u64(kSourceMagic);
  w.u32(kVersion);
  w.u64(ckpt.config_hash);
  w.u64(ckpt.seed);
  w.f64(ckpt.holdout_accuracy);
  write_arch(w, ckpt.arch);
  w.params(ckpt.params);
  w.matrix(ckpt.prototype_vertices);
  w.matrix(ckpt.weight_vertices);
  if (!out) throw IoError("short write to " + path);
}

SourceCheckpoint load_source(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  io::BinaryReader r(in);
  if (r.u64() != kSourceMagic)
    throw CheckpointError(path + " is not a source checkpoint");
  if (r.u32() != kVersion)
    throw CheckpointError(path + ": unsupported checkpoint version");
  SourceCheckpoint ckpt;
  ckpt.config_hash = r.u64();
  ckpt.seed = r.u64();
  ckpt.holdout_accuracy = r.f64();
  ckpt.arch = read_arch(r);
  ckpt.params = r.params();
  ckpt.prototype_vertices = r.matrix();
  ckpt.weight_vertices = r.matrix();
  return ckpt;
}

}  // namespace ctta::checkpoint
