#pragma once

#include <cstdint>
#include <string>

#include "ctta/net.hpp"
#include "ctta/optim.hpp"
#include "ctta/relation.hpp"
#include "ctta/serialize.hpp"

namespace ctta::checkpoint {

// Persisted source model: parameters plus both flavors of the intrinsic
// relation graph (the prototype one cannot be rebuilt later because source
// data is gone at adaptation time).
struct SourceCheckpoint {
  nn::NetworkArch arch;
  nn::ParamSet params;
  nn::Matrix prototype_vertices;  // C x h unit rows
  nn::Matrix weight_vertices;     // C x h unit rows
  double holdout_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

void save_source(const std::string& path, const SourceCheckpoint& ckpt);
SourceCheckpoint load_source(const std::string& path);

void write_arch(io::BinaryWriter& w, const nn::NetworkArch& arch);
nn::NetworkArch read_arch(io::BinaryReader& r);

}  // namespace ctta::checkpoint
