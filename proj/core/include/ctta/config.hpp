#pragma once

#include <cstdint>
#include <string>

#include "ctta/adapter.hpp"
#include "ctta/net.hpp"
#include "ctta/stream.hpp"

namespace ctta::harness {

// Everything a run needs, loadable from a flat "key = value" file with
// sections. The semantic fields (method, seed, model, source, stream,
// adaptation) feed the config hash; operational fields (paths, checkpoint
// cadence, audit toggles) do not, so reruns and resumes of the same
// experiment agree on the hash.
struct RunConfig {
  // [run]
  adapter::Method method = adapter::Method::kFull;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  int checkpoint_interval = 0;
  std::int64_t stop_after = 0;
  bool write_manifest = false;
  bool audit_graphs = false;
  std::string source_checkpoint;

  // [model]
  nn::NetworkArch arch;

  // [source]
  stream::SourceSpec source;
  double pretrain_floor = 0.95;
  int pretrain_epochs = 40;
  int pretrain_max_epochs = 200;
  int pretrain_batch = 64;
  double pretrain_lr = 0.0;  // 0 = reuse the adaptation learning rate
  int eval_n = 1000;

  // [stream]
  stream::StreamSchedule schedule;
  int batches_per_domain = 50;

  // [adaptation]
  adapter::AdaptationConfig adapt;

  static RunConfig defaults();
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  std::string to_text() const;         // full, loadable round-trip
  std::string canonical_text() const;  // semantic fields only
  std::uint64_t hash() const;          // FNV-1a over canonical_text

  // Hash of the [model] + [source] sections plus the seed: the scope a
  // pretrained source checkpoint depends on, so one checkpoint can be shared
  // by every method cell of the same seed.
  std::string source_canonical_text() const;
  std::uint64_t source_hash() const;

  // Propagates cross-section fields (dims, seed, batch size, domain ids).
  void finalize();
  void validate() const;

  double effective_pretrain_lr() const {
    return pretrain_lr > 0.0 ? pretrain_lr : adapt.learning_rate;
  }
};

// Shortest-round-trip decimal form (std::to_chars).
std::string fmt_shortest(double v);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace ctta::harness
