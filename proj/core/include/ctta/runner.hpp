#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctta/config.hpp"
#include "ctta/metrics.hpp"

namespace ctta::harness {

struct PretrainResult {
  std::string checkpoint_path;
  double holdout_accuracy = 0.0;
  int epochs = 0;
};

// Trains the source model to the configured held-out accuracy floor and
// persists the checkpoint together with both intrinsic graph variants.
PretrainResult pretrain_source(const RunConfig& cfg, const std::string& out_path);

struct RunResult {
  RunSummary summary;
  double source_acc_before = 0.0;  // held-out source accuracy at init
  double source_acc_after = 0.0;   // same split, post-adaptation student
  std::string out_dir;
  std::uint64_t config_hash = 0;
};

// Executes one adaptation run end to end and writes steps.csv, summary.csv,
// summary.txt, probe.csv (and optional manifest/checkpoints/audit dumps)
// under cfg.out_dir. `resume_checkpoint` continues an interrupted run in the
// same out_dir, reproducing the uninterrupted byte stream.
RunResult run(const RunConfig& cfg, const std::string& resume_checkpoint = "");

struct CellResult {
  std::string label;   // method name or parameter value
  std::uint64_t seed = 0;
  double mean_error = 0.0;
  double source_drop = 0.0;  // accuracy before - after
  std::string out_dir;
};

// Shared-seed ablation grid: one run per (method, seed) over identical
// streams; emits ablation.csv / ablation.txt under out_root.
std::vector<CellResult> ablate(const RunConfig& base,
                               const std::vector<adapter::Method>& methods,
                               const std::vector<std::uint64_t>& seeds,
                               const std::string& out_root, int jobs = 1);

// Hyperparameter sweep for one of {lambda_crp, alpha, capacity}; emits
// sweep.csv / sweep.txt under out_root.
std::vector<CellResult> sweep(const RunConfig& base, const std::string& param,
                              const std::vector<double>& values,
                              const std::vector<std::uint64_t>& seeds,
                              const std::string& out_root, int jobs = 1);

// Re-folds a run directory's persisted records into summary tables; writes
// report_summary.csv next to them and prints the text table.
void report(const std::string& run_dir, std::ostream& out);

// Frozen-model error on a labeled batch.
double eval_error(const nn::ParamSet& params, const nn::NetworkArch& arch,
                  const stream::LabeledBatch& batch);

// The held-out source split used by the pretrain floor and forgetting probe.
stream::LabeledBatch source_holdout(const RunConfig& cfg);

}  // namespace ctta::harness
