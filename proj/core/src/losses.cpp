#include "ctta/losses.hpp"

#include <cmath>

namespace ctta::losses {

namespace {

void check_prob_rows(const Matrix& p, const char* what) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double v = p(i, j);
      if (!(v >= 0.0))
        throw InputError(std::string(what) + ": negative or NaN probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InputError(std::string(what) + ": row does not sum to 1");
  }
}

}  // namespace

LossGrad self_training(const Matrix& q, const Matrix& p) {
  if (q.rows() != p.rows() || q.cols() != p.cols())
    throw DimensionError("self_training: shape mismatch");
  check_prob_rows(q, "self_training teacher");
  check_prob_rows(p, "self_training student");

  const Eigen::Index n = p.rows();
  const Eigen::Index c = p.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossGrad out;
  out.dlogits = Matrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    double ce_qp = 0.0;  // -sum q log p
    double ce_pq = 0.0;  // -sum p log q
    double p_logq = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
      ce_qp -= q(i, j) * clamped_log(p(i, j));
      ce_pq -= p(i, j) * clamped_log(q(i, j));
      p_logq += p(i, j) * clamped_log(q(i, j));
    }
    out.value += (ce_qp + ce_pq) * inv_n;
    for (Eigen::Index j = 0; j < c; ++j) {
      // d/dz_j of -sum q log p is p_j - q_j; of -sum p log q it is
      // p_j (sum_c p_c log q_c - log q_j).
      const double g =
          (p(i, j) - q(i, j)) + p(i, j) * (p_logq - clamped_log(q(i, j)));
      out.dlogits(i, j) = g * inv_n;
    }
  }
  return out;
}

LossGrad replay_ce(const std::vector<int>& labels, const Matrix& p) {
  if (static_cast<std::size_t>(p.rows()) != labels.size())
    throw DimensionError("replay_ce: label count mismatch");
  check_prob_rows(p, "replay_ce student");

  const Eigen::Index n = p.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossGrad out;
  out.dlogits = p * inv_n;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= p.cols())
      throw InputError("replay_ce: label out of range");
    out.value -= clamped_log(p(i, y)) * inv_n;
    out.dlogits(i, y) -= inv_n;
  }
  return out;
}

LossGrad prediction_entropy(const Matrix& p) {
  check_prob_rows(p, "prediction_entropy");
  const Eigen::Index n = p.rows();
  const Eigen::Index c = p.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossGrad out;
  out.dlogits = Matrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
      const double v = p(i, j);
      if (v > 0.0) h -= v * std::log(v);
    }
    out.value += h * inv_n;
    for (Eigen::Index j = 0; j < c; ++j) {
      const double v = p(i, j);
      // dH/dz_j = -p_j (log p_j + H)
      out.dlogits(i, j) = -v * (clamped_log(v) + h) * inv_n;
    }
  }
  return out;
}

LossBreakdown total_loss(double st, double pce, double crp, double lambda_crp) {
  LossBreakdown b;
  b.st = st;
  b.pce = pce;
  b.crp = crp;
  b.lambda_crp = lambda_crp;
  b.total = st + pce + lambda_crp * crp;
  return b;
}

}  // namespace ctta::losses
