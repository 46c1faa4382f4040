#include "ctta/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace ctta::harness {

std::string fmt_shortest(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const std::int64_t i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// kind:severity[:magnitude][@batches]
std::pair<stream::DomainSpec, int> parse_domain(const std::string& token) {
  std::string body = token;
  int batches = 0;
  if (const auto at = body.find('@'); at != std::string::npos) {
    batches = static_cast<int>(parse_int(body.substr(at + 1), "domains"));
    body = body.substr(0, at);
  }
  const auto parts = split_list(body, ':');
  if (parts.empty()) throw ConfigError("domains: empty entry");
  stream::DomainSpec spec;
  spec.kind = stream::transform_from_name(parts[0]);
  if (parts.size() > 1)
    spec.severity = static_cast<int>(parse_int(parts[1], "domains"));
  if (parts.size() > 2) spec.magnitude = parse_double(parts[2], "domains");
  if (parts.size() > 3) throw ConfigError("domains: too many ':' fields");
  return {spec, batches};
}

std::string domain_to_string(const stream::DomainSpec& spec, int batches,
                             int default_batches) {
  std::string s = stream::transform_name(spec.kind);
  s += ':' + std::to_string(spec.severity);
  if (spec.magnitude > 0.0) s += ':' + fmt_shortest(spec.magnitude);
  if (batches != default_batches) s += '@' + std::to_string(batches);
  return s;
}

using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text) {
  KvMap kv;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[section + "." + key] = value;
  }
  return kv;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.arch.input_dim = 16;
  c.arch.hidden = {32, 32};
  c.arch.classes = 5;
  c.arch.activation = nn::Activation::kTanh;
  c.arch.with_bias = true;

  c.source.per_class = 200;
  c.source.mean_scale = 3.0;
  c.source.cluster_std = 0.5;

  c.schedule.mode = stream::ScheduleMode::kAbrupt;
  c.schedule.batch_size = 64;
  c.schedule.cycles = 1;
  const char* kinds[] = {"rotation:5", "noise:4",   "translation:5",
                         "dropout:4",  "scaling:5", "rotation:3",
                         "noise:5",    "translation:3"};
  for (const char* k : kinds) {
    auto [spec, batches] = parse_domain(k);
    c.schedule.domains.emplace_back(spec, batches);
  }
  c.finalize();
  return c;
}

void RunConfig::finalize() {
  source.classes = arch.classes;
  source.dim = arch.input_dim;
  adapt.seed = seed;
  adapt.batch_size = schedule.batch_size;
  for (std::size_t i = 0; i < schedule.domains.size(); ++i) {
    schedule.domains[i].first.id = static_cast<int>(i);
    if (schedule.domains[i].second <= 0)
      schedule.domains[i].second = batches_per_domain;
  }
}

void RunConfig::validate() const {
  arch.validate();
  source.validate();
  schedule.validate();
  adapt.validate();
  if (batches_per_domain <= 0)
    throw ConfigError("batches_per_domain must be positive");
  if (!(pretrain_floor > 0.0 && pretrain_floor <= 1.0))
    throw ConfigError("pretrain_floor must lie in (0, 1]");
  if (pretrain_epochs <= 0 || pretrain_max_epochs < pretrain_epochs)
    throw ConfigError("pretrain epoch bounds are inconsistent");
  if (pretrain_batch <= 0) throw ConfigError("pretrain_batch must be positive");
  if (eval_n <= 0) throw ConfigError("eval_n must be positive");
  if (checkpoint_interval < 0)
    throw ConfigError("checkpoint_interval must be >= 0");
  if (stop_after < 0) throw ConfigError("stop_after must be >= 0");
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c = defaults();
  c.schedule.domains.clear();

  const KvMap kv = parse_kv(text);
  for (const auto& [full_key, value] : kv) {
    const auto dot = full_key.find('.');
    const std::string section = full_key.substr(0, dot);
    const std::string key = full_key.substr(dot + 1);
    const std::string ctx = section + "." + key;

    if (section == "run") {
      if (key == "method") c.method = adapter::method_from_name(value);
      else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value, ctx));
      else if (key == "out_dir") c.out_dir = value;
      else if (key == "checkpoint_interval") c.checkpoint_interval = static_cast<int>(parse_int(value, ctx));
      else if (key == "stop_after") c.stop_after = parse_int(value, ctx);
      else if (key == "write_manifest") c.write_manifest = parse_bool(value, ctx);
      else if (key == "audit_graphs") c.audit_graphs = parse_bool(value, ctx);
      else if (key == "source_checkpoint") c.source_checkpoint = value;
      else throw ConfigError("unknown key " + ctx);
    } else if (section == "model") {
      if (key == "input_dim") c.arch.input_dim = static_cast<int>(parse_int(value, ctx));
      else if (key == "hidden") {
        c.arch.hidden.clear();
        for (const auto& w : split_list(value, ','))
          c.arch.hidden.push_back(static_cast<int>(parse_int(w, ctx)));
      } else if (key == "classes") c.arch.classes = static_cast<int>(parse_int(value, ctx));
      else if (key == "activation") c.arch.activation = nn::activation_from_name(value);
      else if (key == "with_bias") c.arch.with_bias = parse_bool(value, ctx);
      else throw ConfigError("unknown key " + ctx);
    } else if (section == "source") {
      if (key == "per_class") c.source.per_class = static_cast<int>(parse_int(value, ctx));
      else if (key == "mean_scale") c.source.mean_scale = parse_double(value, ctx);
      else if (key == "cluster_std") c.source.cluster_std = parse_double(value, ctx);
      else if (key == "pretrain_floor") c.pretrain_floor = parse_double(value, ctx);
      else if (key == "pretrain_epochs") c.pretrain_epochs = static_cast<int>(parse_int(value, ctx));
      else if (key == "pretrain_max_epochs") c.pretrain_max_epochs = static_cast<int>(parse_int(value, ctx));
      else if (key == "pretrain_batch") c.pretrain_batch = static_cast<int>(parse_int(value, ctx));
      else if (key == "pretrain_lr") c.pretrain_lr = parse_double(value, ctx);
      else if (key == "eval_n") c.eval_n = static_cast<int>(parse_int(value, ctx));
      else throw ConfigError("unknown key " + ctx);
    } else if (section == "stream") {
      if (key == "mode") c.schedule.mode = stream::schedule_mode_from_name(value);
      else if (key == "batch_size") c.schedule.batch_size = static_cast<int>(parse_int(value, ctx));
      else if (key == "batches_per_domain") c.batches_per_domain = static_cast<int>(parse_int(value, ctx));
      else if (key == "cycles") c.schedule.cycles = static_cast<int>(parse_int(value, ctx));
      else if (key == "domains") {
        c.schedule.domains.clear();
        for (const auto& token : split_list(value, ','))
          c.schedule.domains.push_back(parse_domain(token));
      } else throw ConfigError("unknown key " + ctx);
    } else if (section == "adaptation") {
      if (key == "alpha") c.adapt.alpha = parse_double(value, ctx);
      else if (key == "lambda_crp") c.adapt.lambda_crp = parse_double(value, ctx);
      else if (key == "capacity") c.adapt.capacity = static_cast<int>(parse_int(value, ctx));
      else if (key == "learning_rate") c.adapt.learning_rate = parse_double(value, ctx);
      else if (key == "ema_momentum") c.adapt.ema_momentum = parse_double(value, ctx);
      else if (key == "strict_eviction") c.adapt.strict_eviction = parse_bool(value, ctx);
      else if (key == "graph_source") c.adapt.graph_source = relation::intrinsic_source_from_name(value);
      else if (key == "crp_whole_buffer") c.adapt.crp_whole_buffer = parse_bool(value, ctx);
      else throw ConfigError("unknown key " + ctx);
    } else {
      throw ConfigError("unknown config section [" + section + "]");
    }
  }
  if (c.schedule.domains.empty())
    c.schedule.domains = defaults().schedule.domains;
  c.finalize();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

namespace {

void emit_model_source(std::ostream& out, const RunConfig& c) {
  out << "[model]\n";
  out << "input_dim = " << c.arch.input_dim << "\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < c.arch.hidden.size(); ++i)
    out << (i ? "," : "") << c.arch.hidden[i];
  out << "\n";
  out << "classes = " << c.arch.classes << "\n";
  out << "activation = " << nn::activation_name(c.arch.activation) << "\n";
  out << "with_bias = " << (c.arch.with_bias ? "true" : "false") << "\n";
  out << "\n[source]\n";
  out << "per_class = " << c.source.per_class << "\n";
  out << "mean_scale = " << fmt_shortest(c.source.mean_scale) << "\n";
  out << "cluster_std = " << fmt_shortest(c.source.cluster_std) << "\n";
  out << "pretrain_floor = " << fmt_shortest(c.pretrain_floor) << "\n";
  out << "pretrain_epochs = " << c.pretrain_epochs << "\n";
  out << "pretrain_max_epochs = " << c.pretrain_max_epochs << "\n";
  out << "pretrain_batch = " << c.pretrain_batch << "\n";
  out << "pretrain_lr = " << fmt_shortest(c.pretrain_lr) << "\n";
  out << "eval_n = " << c.eval_n << "\n";
}

void emit_semantic(std::ostream& out, const RunConfig& c) {
  out << "[run]\n";
  out << "method = " << adapter::method_name(c.method) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "\n";
  emit_model_source(out, c);
  out << "\n[stream]\n";
  out << "mode = " << stream::schedule_mode_name(c.schedule.mode) << "\n";
  out << "batch_size = " << c.schedule.batch_size << "\n";
  out << "batches_per_domain = " << c.batches_per_domain << "\n";
  out << "cycles = " << c.schedule.cycles << "\n";
  out << "domains = ";
  for (std::size_t i = 0; i < c.schedule.domains.size(); ++i) {
    if (i) out << ", ";
    out << domain_to_string(c.schedule.domains[i].first,
                            c.schedule.domains[i].second, c.batches_per_domain);
  }
  out << "\n";
  out << "\n[adaptation]\n";
  out << "alpha = " << fmt_shortest(c.adapt.alpha) << "\n";
  out << "lambda_crp = " << fmt_shortest(c.adapt.lambda_crp) << "\n";
  out << "capacity = " << c.adapt.capacity << "\n";
  out << "learning_rate = " << fmt_shortest(c.adapt.learning_rate) << "\n";
  out << "ema_momentum = " << fmt_shortest(c.adapt.ema_momentum) << "\n";
  out << "strict_eviction = " << (c.adapt.strict_eviction ? "true" : "false") << "\n";
  out << "graph_source = " << relation::intrinsic_source_name(c.adapt.graph_source) << "\n";
  out << "crp_whole_buffer = " << (c.adapt.crp_whole_buffer ? "true" : "false") << "\n";
}

}  // namespace

std::string RunConfig::canonical_text() const {
  std::stringstream ss;
  emit_semantic(ss, *this);
  return ss.str();
}

std::string RunConfig::to_text() const {
  std::stringstream ss;
  emit_semantic(ss, *this);
  ss << "\n[run]\n";  // operational tail, reopened section
  ss << "out_dir = " << out_dir << "\n";
  ss << "checkpoint_interval = " << checkpoint_interval << "\n";
  ss << "stop_after = " << stop_after << "\n";
  ss << "write_manifest = " << (write_manifest ? "true" : "false") << "\n";
  ss << "audit_graphs = " << (audit_graphs ? "true" : "false") << "\n";
  if (!source_checkpoint.empty())
    ss << "source_checkpoint = " << source_checkpoint << "\n";
  return ss.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical_text()); }

std::string RunConfig::source_canonical_text() const {
  std::stringstream ss;
  ss << "seed = " << seed << "\n\n";
  emit_model_source(ss, *this);
  // pretrain_lr = 0 falls back to the adaptation rate, so the effective
  // value is part of what the trained source model depends on.
  ss << "effective_pretrain_lr = " << fmt_shortest(effective_pretrain_lr())
     << "\n";
  return ss.str();
}

std::uint64_t RunConfig::source_hash() const {
  return fnv1a64(source_canonical_text());
}

}  // namespace ctta::harness
