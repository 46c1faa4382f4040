#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctta/errors.hpp"
#include "ctta/net.hpp"
#include "ctta/rng.hpp"

namespace ctta::stream {

using nn::Matrix;

enum class TransformKind {
  kIdentity,
  kRotation,
  kTranslation,
  kNoise,
  kScaling,
  kDropout,
};

const char* transform_name(TransformKind k);
TransformKind transform_from_name(const std::string& name);

// One target domain: a parametric feature-space shift whose strength grows
// monotonically with the severity level.
struct DomainSpec {
  int id = 0;
  TransformKind kind = TransformKind::kIdentity;
  int severity = 0;        // 0 = passthrough, otherwise 1..5
  double magnitude = 0.0;  // per-severity-unit strength; 0 picks kind default

  void validate() const;
  double strength() const;  // severity * unit magnitude
};

enum class ScheduleMode { kAbrupt, kGradual, kCyclic };

const char* schedule_mode_name(ScheduleMode m);
ScheduleMode schedule_mode_from_name(const std::string& name);

// Ordered (domain, batch count) sequence plus the mode that expands it:
// abrupt keeps the sequence as written, gradual walks each domain through
// the severity ramp 1-2-3-4-5-4-3-2-1, cyclic repeats the whole sequence.
struct StreamSchedule {
  std::vector<std::pair<DomainSpec, int>> domains;
  ScheduleMode mode = ScheduleMode::kAbrupt;
  int cycles = 1;
  int batch_size = 64;

  struct Segment {
    DomainSpec spec;
    int batches = 0;
    int round = 0;       // cycle index (always 0 outside cyclic mode)
    int first_batch = 0; // global batch index of the segment start
  };

  std::vector<Segment> expand() const;
  int total_batches() const;
  void validate() const;
};

// Source-domain geometry: well separated Gaussian class clusters.
struct SourceSpec {
  int classes = 5;
  int dim = 16;
  int per_class = 200;
  double mean_scale = 3.0;
  double cluster_std = 0.5;

  void validate() const;
};

struct LabeledDataset {
  Matrix x;             // rows class-major
  std::vector<int> y;
};

struct LabeledBatch {
  Matrix features;
  std::vector<int> labels;  // hidden ground truth, evaluation only
  int domain_id = 0;
  int severity = 0;
  int segment = 0;
  std::int64_t step = 0;
};

// What the adapter is allowed to see: features and position, no labels.
struct BatchView {
  const Matrix& features;
  std::int64_t step;
};

inline BatchView adapter_view(const LabeledBatch& b) {
  return BatchView{b.features, b.step};
}

Matrix class_means(std::uint64_t seed, const SourceSpec& spec);
LabeledDataset make_source_dataset(std::uint64_t seed, const SourceSpec& spec);

// Applies the domain shift in place. Per-domain parameters (rotation planes,
// shift direction, dropout mask) derive from (seed, domain id) only; sample
// noise draws from `noise_rng` so batches stay reproducible by index.
void apply_transform(const DomainSpec& spec, std::uint64_t seed,
                     Rng& noise_rng, Matrix& x);

// Sequential cursor over the expanded schedule. Generation is pure given
// (seed, batch index), so seeking is exact.
class StreamCursor {
 public:
  StreamCursor(std::uint64_t seed, SourceSpec source, StreamSchedule schedule);

  std::optional<LabeledBatch> next();
  void seek(std::int64_t batch_index);
  std::int64_t position() const { return pos_; }
  int total_batches() const { return total_; }
  const std::vector<StreamSchedule::Segment>& segments() const {
    return segments_;
  }
  int batch_size() const { return schedule_.batch_size; }

 private:
  std::uint64_t seed_;
  SourceSpec source_;
  StreamSchedule schedule_;
  std::vector<StreamSchedule::Segment> segments_;
  Matrix means_;
  std::int64_t pos_ = 0;
  int total_ = 0;
};

// Held-out per-domain evaluation batch; draws from an RNG stream disjoint
// from every adaptation batch. Fixed (seed, spec, n) gives identical output.
LabeledBatch eval_split(std::uint64_t seed, const SourceSpec& source,
                        const DomainSpec& domain, int n);

// Structured-text audit dump: one line per batch.
void write_manifest(std::ostream& out,
                    const std::vector<StreamSchedule::Segment>& segments);

}  // namespace ctta::stream
