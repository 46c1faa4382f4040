#include "ctta/net.hpp"

#include <cmath>
#include <stdexcept>

namespace ctta::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation: " + name);
}

void NetworkArch::validate() const {
  if (input_dim <= 0) throw ConfigError("input_dim must be positive");
  if (classes < 2) throw ConfigError("class count must be >= 2");
  if (hidden.empty()) throw ConfigError("at least one hidden layer required");
  for (int w : hidden)
    if (w <= 0) throw ConfigError("hidden widths must be positive");
}

bool ParamSet::same_shape(const ParamSet& other) const {
  if (arrays.size() != other.arrays.size()) return false;
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (arrays[i].value.rows() != other.arrays[i].value.rows() ||
        arrays[i].value.cols() != other.arrays[i].value.cols())
      return false;
  }
  return true;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& a : arrays) n += static_cast<std::size_t>(a.value.size());
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& a : arrays)
    if (!a.value.allFinite()) return false;
  return true;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  out.arrays.reserve(p.arrays.size());
  for (const auto& a : p.arrays)
    out.arrays.push_back({a.name, Matrix::Zero(a.value.rows(), a.value.cols())});
  return out;
}

ParamSet init_params(const NetworkArch& arch, Rng rng) {
  arch.validate();
  ParamSet p;
  int fan_in = arch.input_dim;
  const int layers = arch.layer_count();
  for (int l = 0; l < layers; ++l) {
    const int fan_out = (l < layers - 1) ? arch.hidden[l] : arch.classes;
    Matrix w(fan_out, fan_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = scale * rng.next_gaussian();
    p.arrays.push_back({"w" + std::to_string(l), std::move(w)});
    if (arch.with_bias)
      p.arrays.push_back({"b" + std::to_string(l), Matrix::Zero(fan_out, 1)});
    fan_in = fan_out;
  }
  return p;
}

namespace {

// Array index of layer l's weight (and bias) inside the flat ParamSet.
inline int weight_index(const NetworkArch& arch, int l) {
  return arch.with_bias ? 2 * l : l;
}

inline double act_apply(Activation a, double z) {
  return a == Activation::kTanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

inline double act_deriv(Activation a, double z, double y) {
  // y = act(z), reused for tanh
  return a == Activation::kTanh ? 1.0 - y * y : (z > 0.0 ? 1.0 : 0.0);
}

void check_param_layout(const ParamSet& params, const NetworkArch& arch) {
  const int expected =
      arch.layer_count() * (arch.with_bias ? 2 : 1);
  if (static_cast<int>(params.arrays.size()) != expected)
    throw DimensionError("parameter set does not match architecture");
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

ForwardTrace forward(const ParamSet& params, const NetworkArch& arch,
                     const Matrix& batch) {
  check_param_layout(params, arch);
  if (batch.cols() != arch.input_dim)
    throw DimensionError("batch has " + std::to_string(batch.cols()) +
                         " columns, architecture expects " +
                         std::to_string(arch.input_dim));

  ForwardTrace t;
  const int n_hidden = static_cast<int>(arch.hidden.size());
  t.pre.reserve(n_hidden);
  t.act.reserve(n_hidden);

  const Matrix* a = &batch;
  for (int l = 0; l < n_hidden; ++l) {
    const Matrix& w = params.arrays[weight_index(arch, l)].value;
    Matrix z = (*a) * w.transpose();
    if (arch.with_bias)
      z.rowwise() += params.arrays[weight_index(arch, l) + 1].value.col(0).transpose();
    Matrix act(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      act.data()[i] = act_apply(arch.activation, z.data()[i]);
    t.pre.push_back(std::move(z));
    t.act.push_back(std::move(act));
    a = &t.act.back();
  }

  const int lc = n_hidden;  // classifier layer index
  const Matrix& wc = params.arrays[weight_index(arch, lc)].value;
  t.logits = (*a) * wc.transpose();
  if (arch.with_bias)
    t.logits.rowwise() +=
        params.arrays[weight_index(arch, lc) + 1].value.col(0).transpose();
  t.probs = softmax_rows(t.logits);
  return t;
}

ParamSet backward(const ParamSet& params, const NetworkArch& arch,
                  const Matrix& batch, const ForwardTrace& trace,
                  const UpstreamGrad& upstream) {
  check_param_layout(params, arch);
  const int n_hidden = static_cast<int>(arch.hidden.size());
  const Eigen::Index n = batch.rows();

  const bool has_dlogits = upstream.dlogits.size() > 0;
  const bool has_dfeat = upstream.dfeatures.size() > 0;
  if (has_dlogits && (upstream.dlogits.rows() != n ||
                      upstream.dlogits.cols() != arch.classes))
    throw DimensionError("dlogits shape mismatch");
  if (has_dfeat && (upstream.dfeatures.rows() != n ||
                    upstream.dfeatures.cols() != arch.feature_dim()))
    throw DimensionError("dfeatures shape mismatch");
  if ((has_dlogits && !upstream.dlogits.allFinite()) ||
      (has_dfeat && !upstream.dfeatures.allFinite()))
    throw NumericError("non-finite upstream gradient");

  ParamSet grads = zeros_like(params);

  // Classifier layer.
  Matrix dfeat = has_dfeat ? upstream.dfeatures
                           : Matrix::Zero(n, arch.feature_dim());
  const int lc = n_hidden;
  if (has_dlogits) {
    const Matrix& wc = params.arrays[weight_index(arch, lc)].value;
    const Matrix& feat = trace.features();
    grads.arrays[weight_index(arch, lc)].value = upstream.dlogits.transpose() * feat;
    if (arch.with_bias)
      grads.arrays[weight_index(arch, lc) + 1].value =
          upstream.dlogits.colwise().sum().transpose();
    dfeat += upstream.dlogits * wc;
  }

  // Hidden stack, last to first.
  Matrix da = std::move(dfeat);
  for (int l = n_hidden - 1; l >= 0; --l) {
    const Matrix& z = trace.pre[l];
    const Matrix& y = trace.act[l];
    Matrix dz(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      dz.data()[i] =
          da.data()[i] * act_deriv(arch.activation, z.data()[i], y.data()[i]);
    const Matrix& below = (l == 0) ? batch : trace.act[l - 1];
    grads.arrays[weight_index(arch, l)].value = dz.transpose() * below;
    if (arch.with_bias)
      grads.arrays[weight_index(arch, l) + 1].value =
          dz.colwise().sum().transpose();
    if (l > 0) da = dz * params.arrays[weight_index(arch, l)].value;
  }
  return grads;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index j = 0;
    m.row(i).maxCoeff(&j);
    out[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }
  return out;
}

}  // namespace ctta::nn
