#include "ctta/runner.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ctta/adapter.hpp"
#include "ctta/checkpoint.hpp"

namespace fs = std::filesystem;

namespace ctta::harness {

double eval_error(const nn::ParamSet& params, const nn::NetworkArch& arch,
                  const stream::LabeledBatch& batch) {
  const nn::ForwardTrace trace = nn::forward(params, arch, batch.features);
  const auto preds = nn::argmax_rows(trace.probs);
  int wrong = 0;
  for (std::size_t i = 0; i < batch.labels.size(); ++i)
    wrong += preds[i] != batch.labels[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(batch.labels.size());
}

stream::LabeledBatch source_holdout(const RunConfig& cfg) {
  stream::DomainSpec identity;  // id 0, identity, severity 0
  return stream::eval_split(cfg.seed, cfg.source, identity, cfg.eval_n);
}

PretrainResult pretrain_source(const RunConfig& cfg_in,
                               const std::string& out_path) {
  RunConfig cfg = cfg_in;
  cfg.finalize();
  cfg.validate();

  const stream::LabeledDataset train = stream::make_source_dataset(cfg.seed, cfg.source);
  const stream::LabeledBatch holdout = source_holdout(cfg);

  nn::ParamSet params = nn::init_params(
      cfg.arch, split(Rng::from_seed(cfg.seed), RngStream::kInitWeights));
  nn::OptimizerState opt =
      nn::OptimizerState::for_params(params, cfg.effective_pretrain_lr());

  const Eigen::Index n = train.x.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double acc = 0.0;
  int epoch = 0;
  for (epoch = 1; epoch <= cfg.pretrain_max_epochs; ++epoch) {
    Rng shuffle_rng = split(Rng::from_seed(cfg.seed), RngStream::kPretrainShuffle)
                          .split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
    for (Eigen::Index start = 0; start < n; start += cfg.pretrain_batch) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.pretrain_batch, n - start);
      nn::Matrix xb(count, cfg.arch.input_dim);
      std::vector<int> yb(static_cast<std::size_t>(count));
      for (Eigen::Index i = 0; i < count; ++i) {
        xb.row(i) = train.x.row(order[static_cast<std::size_t>(start + i)]);
        yb[static_cast<std::size_t>(i)] =
            train.y[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
      }
      const nn::ForwardTrace trace = nn::forward(params, cfg.arch, xb);
      const losses::LossGrad ce = losses::replay_ce(yb, trace.probs);
      nn::ParamSet grads =
          nn::backward(params, cfg.arch, xb, trace, {ce.dlogits, {}});
      nn::adam_step(params, grads, opt);
    }
    if (epoch >= cfg.pretrain_epochs) {
      acc = 1.0 - eval_error(params, cfg.arch, holdout);
      if (acc >= cfg.pretrain_floor) break;
    }
  }
  if (acc < cfg.pretrain_floor)
    throw PretrainError("pretraining stalled at held-out accuracy " +
                        fmt_shortest(acc) + " after " +
                        std::to_string(cfg.pretrain_max_epochs) + " epochs");

  checkpoint::SourceCheckpoint ckpt;
  ckpt.arch = cfg.arch;
  ckpt.params = params;
  ckpt.prototype_vertices =
      relation::intrinsic_from_prototypes(params, cfg.arch, train.x, train.y).vertices;
  ckpt.weight_vertices = relation::intrinsic_from_weights(params, cfg.arch).vertices;
  ckpt.holdout_accuracy = acc;
  ckpt.seed = cfg.seed;
  ckpt.config_hash = cfg.source_hash();

  if (const fs::path dir = fs::path(out_path).parent_path(); !dir.empty())
    fs::create_directories(dir);
  checkpoint::save_source(out_path, ckpt);
  return {out_path, acc, std::min(epoch, cfg.pretrain_max_epochs)};
}

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Keeps records with step < resume_step, rewrites the file to exactly those
// lines, and returns them for accumulator seeding.
std::vector<MetricsRecord> retain_records(const fs::path& steps_path,
                                          std::int64_t resume_step,
                                          int classes,
                                          std::uint64_t config_hash) {
  std::vector<MetricsRecord> retained;
  if (fs::exists(steps_path)) {
    std::uint64_t file_hash = 0;
    auto records = read_steps_file(steps_path.string(), &file_hash);
    if (file_hash != config_hash)
      throw CheckpointError(steps_path.string() +
                            ": config hash mismatch, refusing to resume");
    for (auto& r : records)
      if (r.step < resume_step) retained.push_back(std::move(r));
  }
  std::ofstream out(steps_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + steps_path.string());
  write_steps_header(out, classes, config_hash);
  for (const auto& r : retained) write_record(out, r);
  return retained;
}

void dump_audit(const fs::path& audit_dir, const adapter::TeacherStudentState& state) {
  fs::create_directories(audit_dir);
  const std::string tag = std::to_string(state.step);
  {
    std::ofstream out(audit_dir / ("buffer_step_" + tag + ".txt"));
    state.buf.write_snapshot(out, state.arch.classes);
  }
  std::ofstream out(audit_dir / ("graph_step_" + tag + ".txt"));
  out << "# intrinsic edge matrix S\n" << state.intrinsic.edges() << "\n";
  if (!state.buf.empty()) {
    const auto all = state.buf.all_entries();
    const nn::ForwardTrace trace = nn::forward(state.student, state.arch, all.inputs);
    const relation::TargetGraph tg = relation::estimate_target_graph(
        trace.features(), all.labels, state.arch.classes);
    out << "# target edge matrix S~ (whole buffer, current student)\n"
        << tg.graph.edges() << "\n";
  } else {
    out << "# target edge matrix S~: buffer empty\n";
  }
}

}  // namespace

RunResult run(const RunConfig& cfg_in, const std::string& resume_checkpoint) {
  RunConfig cfg = cfg_in;
  cfg.finalize();
  cfg.validate();
  const std::uint64_t hash = cfg.hash();

  if (cfg.source_checkpoint.empty())
    throw CheckpointError("run: no source checkpoint configured");
  const checkpoint::SourceCheckpoint source =
      checkpoint::load_source(cfg.source_checkpoint);
  if (!(source.arch == cfg.arch))
    throw CheckpointError("source checkpoint architecture does not match config");
  if (source.config_hash != cfg.source_hash())
    throw CheckpointError("source checkpoint was trained under a different "
                          "model/source configuration");

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "checkpoints");

  const adapter::Wiring wiring = adapter::wiring_for(cfg.method);
  adapter::TeacherStudentState state;
  std::vector<MetricsRecord> prior;

  stream::StreamCursor cursor(cfg.seed, cfg.source, cfg.schedule);
  const fs::path steps_path = out_dir / "steps.csv";

  if (!resume_checkpoint.empty()) {
    state = adapter::load_state(resume_checkpoint, hash);
    prior = retain_records(steps_path, state.step, cfg.arch.classes, hash);
  } else {
    state = adapter::init_state(source, cfg.adapt, wiring);
    std::ofstream out(steps_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + steps_path.string());
    write_steps_header(out, cfg.arch.classes, hash);
  }

  const stream::LabeledBatch holdout = source_holdout(cfg);
  const double acc_before = 1.0 - eval_error(source.params, cfg.arch, holdout);

  if (cfg.write_manifest) {
    std::ofstream out(out_dir / "manifest.txt", std::ios::trunc);
    out << "# config_hash=" << hash_hex(hash) << "\n";
    stream::write_manifest(out, cursor.segments());
  }

  std::ofstream steps_out(steps_path, std::ios::app);
  if (!steps_out) throw IoError("cannot append to " + steps_path.string());

  adapter::RunOptions opts;
  opts.checkpoint_interval = cfg.checkpoint_interval;
  opts.stop_after = cfg.stop_after;
  opts.prior_records = &prior;
  opts.record_sink = [&](const MetricsRecord& r) { write_record(steps_out, r); };
  opts.checkpoint_sink = [&](const adapter::TeacherStudentState& st) {
    adapter::save_state(
        (out_dir / "checkpoints" / ("step_" + std::to_string(st.step) + ".ckpt"))
            .string(),
        st, hash);
    if (cfg.audit_graphs) dump_audit(out_dir / "audit", st);
  };

  std::vector<MetricsRecord> fresh;
  try {
    fresh = adapter::run_stream(state, cursor, cfg.adapt, wiring, opts);
  } catch (const NumericError&) {
    // Diagnostic dump: state snapshot plus the batch index it died on.
    steps_out.flush();
    adapter::save_state((out_dir / "diagnostic.ckpt").string(), state, hash);
    write_text_file(out_dir / "diagnostic.txt",
                    "aborted at step " + std::to_string(state.step) + "\n");
    throw;
  }
  steps_out.flush();

  adapter::save_state((out_dir / "checkpoints" / "final.ckpt").string(), state,
                      hash);

  std::vector<MetricsRecord> all = std::move(prior);
  all.insert(all.end(), fresh.begin(), fresh.end());

  const double acc_after = 1.0 - eval_error(state.student, cfg.arch, holdout);

  RunResult res;
  res.summary = fold_records(all, cursor.segments());
  res.source_acc_before = acc_before;
  res.source_acc_after = acc_after;
  res.out_dir = cfg.out_dir;
  res.config_hash = hash;

  write_text_file(out_dir / "run_config.txt", cfg.to_text());
  {
    std::ofstream out(out_dir / "summary.csv", std::ios::trunc);
    write_summary_csv(out, res.summary, hash);
  }
  {
    std::ofstream out(out_dir / "probe.csv", std::ios::trunc);
    out << "# config_hash=" << hash_hex(hash) << "\n";
    out << "metric,value\n";
    out << "source_holdout_acc_before," << fmt_double(acc_before) << "\n";
    out << "source_holdout_acc_after," << fmt_double(acc_after) << "\n";
    out << "source_holdout_acc_drop," << fmt_double(acc_before - acc_after)
        << "\n";
  }
  {
    std::ofstream out(out_dir / "summary.txt", std::ios::trunc);
    out << "run " << adapter::method_name(cfg.method) << " seed " << cfg.seed
        << " config " << hash_hex(hash) << "\n\n";
    write_summary_text(out, res.summary);
    char line[128];
    std::snprintf(line, sizeof line,
                  "\nsource held-out accuracy: %.4f -> %.4f (drop %.4f)\n",
                  acc_before, acc_after, acc_before - acc_after);
    out << line;
  }
  return res;
}

namespace {

RunConfig cell_config(const RunConfig& base, adapter::Method method,
                      std::uint64_t seed, const std::string& out_dir,
                      const std::string& source_ckpt) {
  RunConfig c = base;
  c.method = method;
  c.seed = seed;
  c.out_dir = out_dir;
  c.source_checkpoint = source_ckpt;
  c.finalize();
  return c;
}

// Pretrains (or reuses) the per-seed source checkpoint shared by all cells.
std::string ensure_source(const RunConfig& base, std::uint64_t seed,
                          const fs::path& out_root) {
  RunConfig c = base;
  c.seed = seed;
  c.finalize();
  const fs::path path = out_root / ("source_s" + std::to_string(seed) + ".ckpt");
  if (fs::exists(path)) {
    try {
      const auto ckpt = checkpoint::load_source(path.string());
      if (ckpt.config_hash == c.source_hash()) return path.string();
    } catch (const std::exception&) {
      // fall through to retrain
    }
  }
  pretrain_source(c, path.string());
  return path.string();
}

std::vector<CellResult> run_cells(std::vector<RunConfig> configs,
                                  std::vector<std::string> labels, int jobs) {
  std::vector<CellResult> cells(configs.size());
  const int workers = std::max(1, jobs);
  std::size_t next = 0;
  while (next < configs.size()) {
    const std::size_t batch =
        std::min<std::size_t>(static_cast<std::size_t>(workers),
                              configs.size() - next);
    std::vector<std::future<RunResult>> futs;
    futs.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i)
      futs.push_back(std::async(std::launch::async, [&configs, next, i]() {
        return run(configs[next + i]);
      }));
    for (std::size_t i = 0; i < batch; ++i) {
      const RunResult r = futs[i].get();
      CellResult& cell = cells[next + i];
      cell.label = labels[next + i];
      cell.seed = configs[next + i].seed;
      cell.mean_error = r.summary.mean_error;
      cell.source_drop = r.source_acc_before - r.source_acc_after;
      cell.out_dir = r.out_dir;
    }
    next += batch;
  }
  return cells;
}

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  if (xs.empty()) return a;
  a.mean = std::accumulate(xs.begin(), xs.end(), 0.0) /
           static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - a.mean) * (x - a.mean);
  a.stddev = xs.size() > 1
                 ? std::sqrt(ss / static_cast<double>(xs.size() - 1))
                 : 0.0;
  return a;
}

void write_grid_tables(const fs::path& out_root, const std::string& stem,
                       const std::string& key_column,
                       const std::vector<std::string>& row_labels,
                       const std::vector<std::uint64_t>& seeds,
                       const std::vector<CellResult>& cells,
                       std::uint64_t base_hash) {
  std::ofstream csv(out_root / (stem + ".csv"), std::ios::trunc);
  csv << "# base_config_hash=" << hash_hex(base_hash) << "\n";
  csv << key_column << ",seed,mean_error,source_drop\n";
  for (const auto& c : cells)
    csv << c.label << ',' << c.seed << ',' << fmt_double(c.mean_error) << ','
        << fmt_double(c.source_drop) << "\n";

  std::ofstream txt(out_root / (stem + ".txt"), std::ios::trunc);
  char line[256];
  txt << key_column << " x seeds: mean online error\n\n";
  std::snprintf(line, sizeof line, "%-16s", key_column.c_str());
  txt << line;
  for (auto s : seeds) {
    std::snprintf(line, sizeof line, " s%-8" PRIu64, s);
    txt << line;
  }
  txt << "  mean+-std\n";
  for (const auto& label : row_labels) {
    std::snprintf(line, sizeof line, "%-16s", label.c_str());
    txt << line;
    std::vector<double> errs;
    for (auto s : seeds) {
      for (const auto& c : cells)
        if (c.label == label && c.seed == s) {
          std::snprintf(line, sizeof line, " %-9.4f", c.mean_error);
          txt << line;
          errs.push_back(c.mean_error);
        }
    }
    const Aggregate a = aggregate(errs);
    std::snprintf(line, sizeof line, "  %.4f+-%.4f\n", a.mean, a.stddev);
    txt << line;
  }
}

}  // namespace

std::vector<CellResult> ablate(const RunConfig& base,
                               const std::vector<adapter::Method>& methods,
                               const std::vector<std::uint64_t>& seeds,
                               const std::string& out_root_str, int jobs) {
  if (methods.empty() || seeds.empty())
    throw ConfigError("ablate: methods and seeds must be non-empty");
  const fs::path out_root(out_root_str);
  fs::create_directories(out_root / "cells");

  std::vector<std::string> source_paths;
  for (auto seed : seeds)
    source_paths.push_back(ensure_source(base, seed, out_root));

  std::vector<RunConfig> configs;
  std::vector<std::string> labels;
  for (const auto method : methods) {
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const std::string name = adapter::method_name(method);
      const std::string dir =
          (out_root / "cells" /
           (name + "_s" + std::to_string(seeds[si])))
              .string();
      configs.push_back(
          cell_config(base, method, seeds[si], dir, source_paths[si]));
      labels.push_back(name);
    }
  }

  auto cells = run_cells(std::move(configs), std::move(labels), jobs);

  std::vector<std::string> row_labels;
  for (const auto method : methods)
    row_labels.emplace_back(adapter::method_name(method));
  write_grid_tables(out_root, "ablation", "method", row_labels, seeds, cells,
                    base.hash());
  return cells;
}

std::vector<CellResult> sweep(const RunConfig& base, const std::string& param,
                              const std::vector<double>& values,
                              const std::vector<std::uint64_t>& seeds,
                              const std::string& out_root_str, int jobs) {
  if (values.empty() || seeds.empty())
    throw ConfigError("sweep: values and seeds must be non-empty");
  if (param != "lambda_crp" && param != "alpha" && param != "capacity")
    throw ConfigError("sweep: unknown parameter " + param);

  const fs::path out_root(out_root_str);
  fs::create_directories(out_root / "cells");

  std::vector<std::string> source_paths;
  for (auto seed : seeds)
    source_paths.push_back(ensure_source(base, seed, out_root));

  std::vector<RunConfig> configs;
  std::vector<std::string> labels;
  std::vector<std::string> row_labels;
  for (const double v : values) {
    const std::string label = fmt_shortest(v);
    row_labels.push_back(label);
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      RunConfig c = cell_config(
          base, base.method, seeds[si],
          (out_root / "cells" /
           (param + "_" + label + "_s" + std::to_string(seeds[si])))
              .string(),
          source_paths[si]);
      if (param == "lambda_crp") c.adapt.lambda_crp = v;
      else if (param == "alpha") c.adapt.alpha = v;
      else c.adapt.capacity = static_cast<int>(std::lround(v));
      configs.push_back(std::move(c));
      labels.push_back(label);
    }
  }

  auto cells = run_cells(std::move(configs), std::move(labels), jobs);
  write_grid_tables(out_root, "sweep", param, row_labels, seeds, cells,
                    base.hash());
  return cells;
}

void report(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  RunConfig cfg = RunConfig::from_file((dir / "run_config.txt").string());
  cfg.finalize();
  const std::uint64_t expected = cfg.hash();

  std::uint64_t file_hash = 0;
  const auto records = read_steps_file((dir / "steps.csv").string(), &file_hash);
  if (file_hash != expected)
    throw CheckpointError("steps.csv hash does not match run_config.txt");

  const auto segments = cfg.schedule.expand();
  const RunSummary summary = fold_records(records, segments);

  std::ofstream csv(dir / "report_summary.csv", std::ios::trunc);
  write_summary_csv(csv, summary, file_hash);

  out << "report for " << run_dir << " (config " << hash_hex(file_hash)
      << ", " << records.size() << " records)\n\n";
  write_summary_text(out, summary);
}

}  // namespace ctta::harness
