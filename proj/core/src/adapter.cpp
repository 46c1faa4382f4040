#include "ctta/adapter.hpp"

#include <cmath>
#include <fstream>

#include "ctta/serialize.hpp"

namespace ctta::adapter {

const char* method_name(Method m) {
  switch (m) {
    case Method::kFull:
      return "full";
    case Method::kStOnly:
      return "st_only";
    case Method::kStPce:
      return "st_pce";
    case Method::kStCrp:
      return "st_crp";
    case Method::kSourceOnly:
      return "source_only";
    case Method::kEntropyMin:
      return "entropy_min";
    case Method::kReservoirPce:
      return "reservoir_pce";
    case Method::kFifoPce:
      return "fifo_pce";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "full") return Method::kFull;
  if (name == "st_only") return Method::kStOnly;
  if (name == "st_pce") return Method::kStPce;
  if (name == "st_crp") return Method::kStCrp;
  if (name == "source_only") return Method::kSourceOnly;
  if (name == "entropy_min") return Method::kEntropyMin;
  if (name == "reservoir_pce") return Method::kReservoirPce;
  if (name == "fifo_pce") return Method::kFifoPce;
  throw ConfigError("unknown method: " + name);
}

Wiring wiring_for(Method m) {
  Wiring w;
  switch (m) {
    case Method::kFull:
      break;
    case Method::kStOnly:
      w.use_pce = false;
      w.use_crp = false;
      w.capacity_override = 0;
      break;
    case Method::kStPce:
      w.use_crp = false;
      break;
    case Method::kStCrp:
      w.use_pce = false;
      break;
    case Method::kSourceOnly:
      w.adapt = false;
      w.use_pce = false;
      w.use_crp = false;
      w.capacity_override = 0;
      break;
    case Method::kEntropyMin:
      w.entropy_objective = true;
      w.use_pce = false;
      w.use_crp = false;
      w.capacity_override = 0;
      break;
    case Method::kReservoirPce:
      w.policy = buffer::BufferPolicy::kReservoir;
      w.use_crp = false;
      break;
    case Method::kFifoPce:
      w.policy = buffer::BufferPolicy::kFifo;
      w.use_crp = false;
      break;
  }
  return w;
}

void AdaptationConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (lambda_crp < 0.0) throw ConfigError("lambda_crp must be non-negative");
  if (capacity < 0) throw ConfigError("capacity must be non-negative");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(ema_momentum >= 0.0 && ema_momentum < 1.0))
    throw ConfigError("EMA momentum must lie in [0, 1)");
}

TeacherStudentState init_state(const checkpoint::SourceCheckpoint& source,
                               const AdaptationConfig& cfg,
                               const Wiring& wiring) {
  cfg.validate();
  source.arch.validate();

  TeacherStudentState st;
  st.arch = source.arch;
  st.student = source.params;
  st.teacher = source.params;
  st.opt = nn::OptimizerState::for_params(source.params, cfg.learning_rate);
  st.ema_momentum = cfg.ema_momentum;

  const int capacity =
      wiring.capacity_override >= 0 ? wiring.capacity_override : cfg.capacity;
  buffer::UncertaintyThreshold thr{cfg.alpha, source.arch.classes};
  st.buf = buffer::UncertaintyBuffer(static_cast<std::size_t>(capacity), thr,
                                     wiring.policy, cfg.strict_eviction);

  const nn::Matrix& vertices =
      cfg.graph_source == relation::IntrinsicSource::kPrototypes
          ? source.prototype_vertices
          : source.weight_vertices;
  if (vertices.rows() != source.arch.classes ||
      vertices.cols() != source.arch.feature_dim())
    throw CheckpointError("intrinsic graph shape does not match architecture");
  st.intrinsic = relation::graph_from_centroids(vertices);
  if (st.intrinsic.present_count() != source.arch.classes)
    throw CheckpointError("intrinsic graph has absent classes");
  return st;
}

StepResult adapt_step(TeacherStudentState& state,
                      const stream::BatchView& batch,
                      const AdaptationConfig& cfg, const Wiring& wiring) {
  StepResult out;

  // (1) Online predictions from the pre-update student.
  const nn::ForwardTrace live = nn::forward(state.student, state.arch, batch.features);
  out.predictions = nn::argmax_rows(live.probs);

  if (!wiring.adapt) {
    state.step += 1;
    return out;
  }

  if (wiring.entropy_objective) {
    // TENT-style baseline: minimize prediction entropy on the live batch.
    const losses::LossGrad ent = losses::prediction_entropy(live.probs);
    out.loss = losses::total_loss(ent.value, 0.0, 0.0, 0.0);
    if (!std::isfinite(out.loss.total))
      throw NumericError("non-finite loss at step " + std::to_string(state.step));
    nn::ParamSet grads = nn::backward(state.student, state.arch, batch.features,
                                      live, {ent.dlogits, {}});
    nn::adam_step(state.student, grads, state.opt);
    state.step += 1;
    return out;
  }

  // (2) Teacher pseudo-labels for the live batch.
  const nn::ForwardTrace teach = nn::forward(state.teacher, state.arch, batch.features);

  // (3) Per-sample admission; entropy gate reads the student, pseudo-labels
  // come from the teacher.
  Rng admit_rng = split(Rng::from_seed(cfg.seed), RngStream::kReservoir)
                      .split(static_cast<std::uint64_t>(state.step));
  for (Eigen::Index i = 0; i < batch.features.rows(); ++i) {
    state.buf.admit(batch.features.row(i).transpose(),
                    teach.probs.row(i).transpose(),
                    live.probs.row(i).transpose(), state.step, &admit_rng);
  }

  // (4) Replay draw, one batch worth.
  Rng replay_rng = split(Rng::from_seed(cfg.seed), RngStream::kReplay)
                       .split(static_cast<std::uint64_t>(state.step));
  const auto replay = state.buf.sample_replay(cfg.batch_size, replay_rng);

  // (5..6) Loss terms with their degenerate-input zeroing rules.
  const losses::LossGrad st_loss = losses::self_training(teach.probs, live.probs);

  double pce_value = 0.0;
  double crp_value = 0.0;
  const double lambda = wiring.use_crp ? cfg.lambda_crp : 0.0;

  std::optional<nn::ForwardTrace> replay_trace;
  nn::UpstreamGrad replay_up;
  if (!replay.empty()) {
    replay_trace = nn::forward(state.student, state.arch, replay.inputs);
    if (wiring.use_pce) {
      const losses::LossGrad pce = losses::replay_ce(replay.labels, replay_trace->probs);
      pce_value = pce.value;
      replay_up.dlogits = pce.dlogits;
    }
  }

  // Target graph from current student features of buffered samples; gradients
  // flow into the student only (pseudo-labels are constants).
  std::optional<nn::ForwardTrace> graph_trace;  // whole-buffer variant
  buffer::UncertaintyBuffer::ReplayBatch whole_batch;
  nn::Matrix graph_dfeatures;
  bool graph_on_replay = false;
  if (lambda > 0.0 && !state.buf.empty()) {
    const bool whole = cfg.crp_whole_buffer;
    const nn::ForwardTrace* trace = nullptr;
    const std::vector<int>* graph_labels = nullptr;
    if (whole) {
      whole_batch = state.buf.all_entries();
      graph_trace = nn::forward(state.student, state.arch, whole_batch.inputs);
      trace = &*graph_trace;
      graph_labels = &whole_batch.labels;
    } else {
      trace = &*replay_trace;
      graph_labels = &replay.labels;
      graph_on_replay = true;
    }
    const relation::TargetGraph tg = relation::estimate_target_graph(
        trace->features(), *graph_labels, state.arch.classes);
    const relation::CrpResult crp = relation::crp_loss(state.intrinsic, tg.graph);
    if (crp.active) {
      crp_value = crp.loss;
      graph_dfeatures = lambda * relation::crp_feature_grad(crp, tg);
      out.target_edges = tg.graph.edges();
    }
  }

  out.loss = losses::total_loss(st_loss.value, pce_value, crp_value, lambda);
  if (!std::isfinite(out.loss.total))
    throw NumericError("non-finite loss at step " + std::to_string(state.step));

  // (7) One Adam step on the student, accumulating both passes.
  nn::ParamSet grads = nn::backward(state.student, state.arch, batch.features,
                                    live, {st_loss.dlogits, {}});
  if (replay_trace) {
    if (graph_on_replay && graph_dfeatures.size() > 0)
      replay_up.dfeatures = graph_dfeatures;
    if (replay_up.dlogits.size() > 0 || replay_up.dfeatures.size() > 0) {
      const nn::ParamSet rg = nn::backward(state.student, state.arch,
                                           replay.inputs, *replay_trace, replay_up);
      for (std::size_t k = 0; k < grads.arrays.size(); ++k)
        grads.arrays[k].value += rg.arrays[k].value;
    }
  }
  if (graph_trace && graph_dfeatures.size() > 0) {
    const nn::ParamSet gg = nn::backward(state.student, state.arch,
                                         whole_batch.inputs, *graph_trace,
                                         {{}, graph_dfeatures});
    for (std::size_t k = 0; k < grads.arrays.size(); ++k)
      grads.arrays[k].value += gg.arrays[k].value;
  }
  if (!grads.all_finite())
    throw NumericError("non-finite gradient at step " + std::to_string(state.step));
  nn::adam_step(state.student, grads, state.opt);

  // (8) Teacher follows the post-step student.
  state.teacher = nn::ema_update(state.teacher, state.student, state.ema_momentum);

  // (9)
  state.step += 1;
  return out;
}

std::vector<harness::MetricsRecord> run_stream(TeacherStudentState& state,
                                               stream::StreamCursor& cursor,
                                               const AdaptationConfig& cfg,
                                               const Wiring& wiring,
                                               const RunOptions& opts) {
  cursor.seek(state.step);
  std::vector<harness::MetricsRecord> records;

  // Within-segment error accumulators; a resume refills them from the
  // records retained on disk so cumulative columns continue seamlessly.
  std::vector<double> seg_err(cursor.segments().size(), 0.0);
  std::vector<int> seg_count(cursor.segments().size(), 0);
  if (opts.prior_records) {
    for (const auto& r : *opts.prior_records) {
      const auto seg = static_cast<std::size_t>(r.segment);
      if (seg >= seg_err.size())
        throw InputError("prior record references unknown segment");
      seg_err[seg] += r.batch_error;
      seg_count[seg] += 1;
    }
  }

  while (auto batch = cursor.next()) {
    const StepResult step =
        adapt_step(state, stream::adapter_view(*batch), cfg, wiring);

    int wrong = 0;
    for (std::size_t i = 0; i < batch->labels.size(); ++i)
      wrong += step.predictions[i] != batch->labels[i] ? 1 : 0;

    harness::MetricsRecord rec;
    rec.step = batch->step;
    rec.segment = batch->segment;
    rec.domain_id = batch->domain_id;
    rec.severity = batch->severity;
    rec.batch_error = static_cast<double>(wrong) /
                      static_cast<double>(batch->labels.size());
    const auto seg = static_cast<std::size_t>(batch->segment);
    seg_err[seg] += rec.batch_error;
    seg_count[seg] += 1;
    rec.domain_cum_error = seg_err[seg] / seg_count[seg];
    rec.loss = step.loss;
    rec.buffer_size = static_cast<int>(state.buf.size());
    rec.label_hist = state.buf.pseudo_label_histogram(state.arch.classes);

    if (opts.record_sink) opts.record_sink(rec);
    records.push_back(std::move(rec));

    if (opts.checkpoint_interval > 0 && opts.checkpoint_sink &&
        state.step % opts.checkpoint_interval == 0)
      opts.checkpoint_sink(state);

    if (opts.stop_after > 0 && state.step >= opts.stop_after) break;
  }
  return records;
}

namespace {
constexpr std::uint64_t kStateMagic = 0x43545441'53544130ull;  // "CTTASTA0"
constexpr std::uint32_t kStateVersion = 1;
}  // namespace

void save_state(const std::string& path, const TeacherStudentState& state,
                std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  io::BinaryWriter w(out);
  w.u64(kStateMagic);
  w.u32(kStateVersion);
  w.u64(config_hash);
  checkpoint::write_arch(w, state.arch);
  w.params(state.student);
  w.params(state.teacher);
  w.params(state.opt.m);
  w.params(state.opt.v);
  w.i64(state.opt.step);
  w.f64(state.opt.learning_rate);
  w.f64(state.opt.beta1);
  w.f64(state.opt.beta2);
  w.f64(state.opt.epsilon);
  w.f64(state.ema_momentum);
  w.i64(state.step);

  const auto snap = state.buf.snapshot();
  w.u64(snap.capacity);
  w.f64(snap.threshold.alpha);
  w.u32(static_cast<std::uint32_t>(snap.threshold.classes));
  w.u8(static_cast<std::uint8_t>(snap.policy));
  w.u8(snap.strict ? 1 : 0);
  w.i64(snap.seen);
  w.u32(static_cast<std::uint32_t>(snap.entries.size()));
  for (const auto& e : snap.entries) {
    w.matrix(e.input);
    w.u32(static_cast<std::uint32_t>(e.pseudo_label));
    w.f64(e.entropy);
    w.i64(e.admit_step);
  }

  w.matrix(state.intrinsic.vertices);
  if (!out) throw IoError("short write to " + path);
}

TeacherStudentState load_state(const std::string& path,
                               std::uint64_t expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  io::BinaryReader r(in);
  if (r.u64() != kStateMagic)
    throw CheckpointError(path + " is not a state checkpoint");
  if (r.u32() != kStateVersion)
    throw CheckpointError(path + ": unsupported state version");
  const std::uint64_t hash = r.u64();
  if (hash != expected_config_hash)
    throw CheckpointError(path + ": config hash mismatch, refusing to resume");

  TeacherStudentState st;
  st.arch = checkpoint::read_arch(r);
  st.student = r.params();
  st.teacher = r.params();
  st.opt.m = r.params();
  st.opt.v = r.params();
  st.opt.step = r.i64();
  st.opt.learning_rate = r.f64();
  st.opt.beta1 = r.f64();
  st.opt.beta2 = r.f64();
  st.opt.epsilon = r.f64();
  st.ema_momentum = r.f64();
  st.step = r.i64();

  buffer::UncertaintyBuffer::Snapshot snap;
  snap.capacity = r.u64();
  snap.threshold.alpha = r.f64();
  snap.threshold.classes = static_cast<int>(r.u32());
  snap.policy = static_cast<buffer::BufferPolicy>(r.u8());
  snap.strict = r.u8() != 0;
  snap.seen = r.i64();
  const std::uint32_t count = r.u32();
  if (count > (1u << 24)) throw CheckpointError("implausible buffer size");
  snap.entries.resize(count);
  for (auto& e : snap.entries) {
    e.input = r.matrix();
    e.pseudo_label = static_cast<int>(r.u32());
    e.entropy = r.f64();
    e.admit_step = r.i64();
  }
  st.buf = buffer::UncertaintyBuffer::restore(std::move(snap));

  st.intrinsic = relation::graph_from_centroids(r.matrix());
  return st;
}

}  // namespace ctta::adapter
