// Command line front end: pretrain | run | ablate | sweep | report.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctta/adapter.hpp"
#include "ctta/config.hpp"
#include "ctta/errors.hpp"
#include "ctta/runner.hpp"

namespace {

namespace fs = std::filesystem;
using ctta::harness::RunConfig;

// CTTA_OUT_ROOT prefixes relative output paths.
std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("CTTA_OUT_ROOT"))
    return (fs::path(root) / path).string();
  return path;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string method;
  std::int64_t seed = -1;
  double alpha = -1.0;
  double lambda_crp = -1.0;
  int capacity = -1;
  int batch_size = -1;
  double learning_rate = -1.0;
  double ema_momentum = -1.0;
  std::string graph_source;
  int checkpoint_interval = -1;
  std::int64_t stop_after = -1;
  bool write_manifest = false;
  bool audit_graphs = false;
  std::string source_checkpoint;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("-c,--config", f.config_path, "run config file");
  cmd->add_option("-o,--out", f.out_dir, "output directory");
  cmd->add_option("--method", f.method,
                  "full|st_only|st_pce|st_crp|source_only|entropy_min|"
                  "reservoir_pce|fifo_pce");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--alpha", f.alpha, "entropy threshold coefficient");
  cmd->add_option("--lambda-crp", f.lambda_crp, "relation loss weight");
  cmd->add_option("--capacity", f.capacity, "buffer capacity");
  cmd->add_option("--batch-size", f.batch_size, "stream batch size");
  cmd->add_option("--lr", f.learning_rate, "adaptation learning rate");
  cmd->add_option("--ema-momentum", f.ema_momentum, "teacher EMA momentum");
  cmd->add_option("--graph-source", f.graph_source, "prototypes|weights");
  cmd->add_option("--checkpoint-interval", f.checkpoint_interval,
                  "steps between checkpoints (0 = off)");
  cmd->add_option("--stop-after", f.stop_after,
                  "stop after N steps (testing aid, 0 = run out)");
  cmd->add_flag("--manifest", f.write_manifest, "write the stream manifest");
  cmd->add_flag("--audit-graphs", f.audit_graphs,
                "dump buffer/graph audit files at checkpoints");
  cmd->add_option("--source-checkpoint", f.source_checkpoint,
                  "pretrained source model path");
}

RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig::defaults()
                                        : RunConfig::from_file(f.config_path);
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (!f.method.empty()) cfg.method = ctta::adapter::method_from_name(f.method);
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (f.alpha >= 0.0) cfg.adapt.alpha = f.alpha;
  if (f.lambda_crp >= 0.0) cfg.adapt.lambda_crp = f.lambda_crp;
  if (f.capacity >= 0) cfg.adapt.capacity = f.capacity;
  if (f.batch_size > 0) cfg.schedule.batch_size = f.batch_size;
  if (f.learning_rate >= 0.0) cfg.adapt.learning_rate = f.learning_rate;
  if (f.ema_momentum >= 0.0) cfg.adapt.ema_momentum = f.ema_momentum;
  if (!f.graph_source.empty())
    cfg.adapt.graph_source =
        ctta::relation::intrinsic_source_from_name(f.graph_source);
  if (f.checkpoint_interval >= 0) cfg.checkpoint_interval = f.checkpoint_interval;
  if (f.stop_after >= 0) cfg.stop_after = f.stop_after;
  if (f.write_manifest) cfg.write_manifest = true;
  if (f.audit_graphs) cfg.audit_graphs = true;
  if (!f.source_checkpoint.empty()) cfg.source_checkpoint = f.source_checkpoint;
  cfg.out_dir = resolve_out(cfg.out_dir);
  if (!cfg.source_checkpoint.empty())
    cfg.source_checkpoint = resolve_out(cfg.source_checkpoint);
  cfg.finalize();
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::uint64_t>& flag) {
  if (!flag.empty()) return flag;
  return {1, 2, 3, 4, 5};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual test-time adaptation harness"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* cmd_pretrain = app.add_subcommand(
      "pretrain", "train the source model and persist its checkpoint");
  add_common(cmd_pretrain, flags);
  std::string pretrain_out = "source.ckpt";
  cmd_pretrain->add_option("--ckpt-out", pretrain_out,
                           "where to write the source checkpoint");

  auto* cmd_run =
      app.add_subcommand("run", "adapt over the configured stream");
  add_common(cmd_run, flags);
  std::string resume;
  cmd_run->add_option("--resume", resume, "state checkpoint to resume from");

  auto* cmd_ablate = app.add_subcommand(
      "ablate", "run the method grid over a shared seed set");
  add_common(cmd_ablate, flags);
  std::vector<std::string> ablate_methods = {
      "st_only", "reservoir_pce", "fifo_pce", "st_pce", "st_crp", "full"};
  std::vector<std::uint64_t> grid_seeds;
  int jobs = 1;
  cmd_ablate->add_option("--methods", ablate_methods, "method grid");
  cmd_ablate->add_option("--seeds", grid_seeds, "seed set (default 1..5)");
  cmd_ablate->add_option("-j,--jobs", jobs, "parallel cells");

  auto* cmd_sweep = app.add_subcommand(
      "sweep", "sweep one hyperparameter over a value grid");
  add_common(cmd_sweep, flags);
  std::string sweep_param = "lambda_crp";
  std::vector<double> sweep_values;
  cmd_sweep->add_option("--param", sweep_param, "lambda_crp|alpha|capacity");
  cmd_sweep->add_option("--values", sweep_values, "value grid");
  cmd_sweep->add_option("--seeds", grid_seeds, "seed set (default 1..5)");
  cmd_sweep->add_option("-j,--jobs", jobs, "parallel cells");

  auto* cmd_report = app.add_subcommand(
      "report", "re-fold a run directory's records into tables");
  std::string report_dir;
  cmd_report->add_option("dir", report_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pretrain->parsed()) {
      RunConfig cfg = build_config(flags);
      const std::string out = resolve_out(pretrain_out);
      const auto res = ctta::harness::pretrain_source(cfg, out);
      std::cout << "source checkpoint: " << res.checkpoint_path << "\n"
                << "held-out accuracy: " << res.holdout_accuracy << " after "
                << res.epochs << " epochs\n";
    } else if (cmd_run->parsed()) {
      RunConfig cfg = build_config(flags);
      const auto res = ctta::harness::run(cfg, resolve_out(resume));
      std::cout << "run complete: mean online error "
                << res.summary.mean_error << "\n"
                << "source held-out accuracy " << res.source_acc_before
                << " -> " << res.source_acc_after << "\n"
                << "outputs in " << res.out_dir << "\n";
    } else if (cmd_ablate->parsed()) {
      RunConfig cfg = build_config(flags);
      std::vector<ctta::adapter::Method> methods;
      for (const auto& name : ablate_methods)
        methods.push_back(ctta::adapter::method_from_name(name));
      const auto cells = ctta::harness::ablate(
          cfg, methods, parse_seeds(grid_seeds), cfg.out_dir, jobs);
      std::cout << "ablation grid complete: " << cells.size()
                << " cells, tables in " << cfg.out_dir << "\n";
    } else if (cmd_sweep->parsed()) {
      RunConfig cfg = build_config(flags);
      if (sweep_values.empty()) {
        if (sweep_param == "lambda_crp")
          sweep_values = {0, 50, 150, 200, 250, 300};
        else if (sweep_param == "alpha")
          sweep_values = {0.05, 0.1, 0.2, 0.4, 0.8};
        else
          sweep_values = {0, 50, 100, 200, 400};
      }
      const auto cells = ctta::harness::sweep(
          cfg, sweep_param, sweep_values, parse_seeds(grid_seeds), cfg.out_dir,
          jobs);
      std::cout << "sweep complete: " << cells.size() << " cells, tables in "
                << cfg.out_dir << "\n";
    } else if (cmd_report->parsed()) {
      ctta::harness::report(resolve_out(report_dir), std::cout);
    }
  } catch (const ctta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ctta::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const ctta::PretrainError& e) {
    std::cerr << "pretrain error: " << e.what() << "\n";
    return 4;
  } catch (const ctta::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
