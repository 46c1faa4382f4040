#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctta/buffer.hpp"
#include "ctta/checkpoint.hpp"
#include "ctta/losses.hpp"
#include "ctta/metrics.hpp"
#include "ctta/net.hpp"
#include "ctta/optim.hpp"
#include "ctta/relation.hpp"
#include "ctta/stream.hpp"

namespace ctta::adapter {

// Method selector. Ablations are parameter rewirings of the full method so
// equivalent configurations produce bit-identical runs.
enum class Method {
  kFull,
  kStOnly,
  kStPce,
  kStCrp,
  kSourceOnly,
  kEntropyMin,
  kReservoirPce,
  kFifoPce,
};

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct Wiring {
  bool adapt = true;             // false: frozen source evaluation
  bool entropy_objective = false;
  bool use_pce = true;
  bool use_crp = true;
  buffer::BufferPolicy policy = buffer::BufferPolicy::kUncertainty;
  int capacity_override = -1;    // >= 0 forces the buffer capacity
};

Wiring wiring_for(Method m);

struct AdaptationConfig {
  double alpha = 0.1;
  double lambda_crp = 200.0;
  int capacity = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double ema_momentum = 0.999;
  bool strict_eviction = true;
  relation::IntrinsicSource graph_source = relation::IntrinsicSource::kPrototypes;
  bool crp_whole_buffer = false;  // estimate G_t from the whole buffer
  std::uint64_t seed = 1;

  void validate() const;
};

struct TeacherStudentState {
  nn::NetworkArch arch;
  nn::ParamSet student;
  nn::ParamSet teacher;
  nn::OptimizerState opt;
  buffer::UncertaintyBuffer buf;
  relation::ClassRelationGraph intrinsic;
  double ema_momentum = 0.999;
  std::int64_t step = 0;
};

// Teacher = student = source; empty buffer; intrinsic graph picked from the
// checkpoint per config. Throws CheckpointError on an arch mismatch.
TeacherStudentState init_state(const checkpoint::SourceCheckpoint& source,
                               const AdaptationConfig& cfg,
                               const Wiring& wiring);

struct StepResult {
  std::vector<int> predictions;  // argmax of the pre-update student
  losses::LossBreakdown loss;
  nn::Matrix target_edges;       // S~ of this step when CRP was active, else empty
};

// One online step: predict, admit into the buffer, replay, estimate the
// target graph, compose the loss, Adam on the student, EMA into the teacher.
StepResult adapt_step(TeacherStudentState& state, const stream::BatchView& batch,
                      const AdaptationConfig& cfg, const Wiring& wiring);

struct RunOptions {
  int checkpoint_interval = 0;  // steps between checkpoint callbacks, 0 = off
  std::int64_t stop_after = 0;  // stop after this step count (0 = run out)
  std::function<void(const TeacherStudentState&)> checkpoint_sink;
  std::function<void(const harness::MetricsRecord&)> record_sink;
  // Records already emitted before a resume; seeds the per-segment
  // cumulative-error accumulators.
  const std::vector<harness::MetricsRecord>* prior_records = nullptr;
};

// Single pass over the (remaining) stream; scores online predictions against
// the hidden labels post hoc. Resumes exactly from state.step.
std::vector<harness::MetricsRecord> run_stream(TeacherStudentState& state,
                                               stream::StreamCursor& cursor,
                                               const AdaptationConfig& cfg,
                                               const Wiring& wiring,
                                               const RunOptions& opts = {});

// Exact state round-trip for resume; the file embeds the config hash and
// load refuses a mismatch.
void save_state(const std::string& path, const TeacherStudentState& state,
                std::uint64_t config_hash);
TeacherStudentState load_state(const std::string& path,
                               std::uint64_t expected_config_hash);

}  // namespace ctta::adapter
