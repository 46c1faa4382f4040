#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

#include "ctta/errors.hpp"
#include "ctta/rng.hpp"

namespace ctta::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kTanh, kRelu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Dense feed-forward classifier: a stack of hidden layers (the feature
// extractor) followed by one linear classifier layer. The activation of the
// last hidden layer is the feature vector; the classifier weight rows double
// as class proxies for the relation graph.
struct NetworkArch {
  int input_dim = 0;
  std::vector<int> hidden;  // widths, at least one
  int classes = 0;          // C >= 2
  Activation activation = Activation::kTanh;
  bool with_bias = true;

  void validate() const;
  int feature_dim() const { return hidden.back(); }
  // Hidden layers plus the final classifier.
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  bool operator==(const NetworkArch&) const = default;
};

// Ordered collection of named parameter arrays. Sets built from the same
// architecture line up array-by-array, which is what the optimizer and the
// EMA update rely on.
struct ParamSet {
  struct Array {
    std::string name;
    Matrix value;
  };
  std::vector<Array> arrays;

  bool same_shape(const ParamSet& other) const;
  std::size_t scalar_count() const;
  bool all_finite() const;
};

ParamSet zeros_like(const ParamSet& p);

// Gaussian init scaled by 1/sqrt(fan_in); biases start at zero.
ParamSet init_params(const NetworkArch& arch, Rng rng);

// Everything the backward pass (and the relation module) needs from one
// forward evaluation of a batch. Rows are samples.
struct ForwardTrace {
  std::vector<Matrix> pre;  // hidden pre-activations, n x width each
  std::vector<Matrix> act;  // hidden activations; act.back() is the feature
  Matrix logits;            // n x C
  Matrix probs;             // n x C, rows sum to 1

  const Matrix& features() const { return act.back(); }
};

// Numerically stable row-wise softmax (subtracts the row max).
Matrix softmax_rows(const Matrix& logits);

ForwardTrace forward(const ParamSet& params, const NetworkArch& arch,
                     const Matrix& batch);

// Upstream gradients feeding the reverse pass. Either member may be empty
// (size 0x0) when that path contributes nothing; dlogits drives the
// classifier, dfeatures enters at the last hidden activation (the relation
// loss contributes there).
struct UpstreamGrad {
  Matrix dlogits;
  Matrix dfeatures;
};

ParamSet backward(const ParamSet& params, const NetworkArch& arch,
                  const Matrix& batch, const ForwardTrace& trace,
                  const UpstreamGrad& upstream);

std::vector<int> argmax_rows(const Matrix& m);

}  // namespace ctta::nn
