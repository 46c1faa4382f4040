#pragma once

#include <vector>

#include "ctta/net.hpp"

namespace ctta::losses {

using nn::Matrix;

// Shared probability floor inside every log.
constexpr double kLogFloor = 1e-12;

inline double clamped_log(double p) {
  return std::log(p < kLogFloor ? kLogFloor : p);
}

// Scalar loss value plus its gradient at the student logits, batch-mean
// scaled (ready to feed the reverse pass).
struct LossGrad {
  double value = 0.0;
  Matrix dlogits;
};

// Symmetric cross-entropy between teacher and student predictions,
// -sum q log p - sum p log q, averaged over the batch. The teacher side is a
// constant; the gradient flows through p only.
LossGrad self_training(const Matrix& teacher_probs, const Matrix& student_probs);

// Cross-entropy of the student against stored pseudo-labels, batch mean.
// The logit gradient is exactly (softmax - one_hot) / n.
LossGrad replay_ce(const std::vector<int>& pseudo_labels,
                   const Matrix& student_probs);

// Mean prediction entropy of the student; the entropy-minimization baseline
// objective.
LossGrad prediction_entropy(const Matrix& student_probs);

struct LossBreakdown {
  double st = 0.0;
  double pce = 0.0;
  double crp = 0.0;
  double lambda_crp = 0.0;
  double total = 0.0;
};

// total = st + pce + lambda * crp, with the breakdown retained for metrics.
LossBreakdown total_loss(double st, double pce, double crp, double lambda_crp);

}  // namespace ctta::losses
