#include "ctta/relation.hpp"

#include <cmath>

namespace ctta::relation {

namespace {
constexpr double kZeroNorm = 1e-12;
}

int ClassRelationGraph::present_count() const {
  int n = 0;
  for (bool p : present) n += p ? 1 : 0;
  return n;
}

Matrix ClassRelationGraph::edges() const {
  const int c = classes();
  Matrix s = Matrix::Zero(c, c);
  for (int i = 0; i < c; ++i) {
    if (!present[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < c; ++j) {
      if (!present[static_cast<std::size_t>(j)]) continue;
      s(i, j) = vertices.row(i).dot(vertices.row(j));
    }
  }
  return s;
}

const char* intrinsic_source_name(IntrinsicSource s) {
  return s == IntrinsicSource::kPrototypes ? "prototypes" : "weights";
}

IntrinsicSource intrinsic_source_from_name(const std::string& name) {
  if (name == "prototypes") return IntrinsicSource::kPrototypes;
  if (name == "weights") return IntrinsicSource::kWeights;
  throw ConfigError("unknown intrinsic graph source: " + name);
}

ClassRelationGraph graph_from_centroids(const Matrix& centroids) {
  ClassRelationGraph g;
  g.vertices = Matrix::Zero(centroids.rows(), centroids.cols());
  g.present.assign(static_cast<std::size_t>(centroids.rows()), false);
  for (Eigen::Index i = 0; i < centroids.rows(); ++i) {
    const double norm = centroids.row(i).norm();
    if (norm <= kZeroNorm) continue;
    g.vertices.row(i) = centroids.row(i) / norm;
    g.present[static_cast<std::size_t>(i)] = true;
  }
  return g;
}

ClassRelationGraph intrinsic_from_prototypes(const nn::ParamSet& params,
                                             const nn::NetworkArch& arch,
                                             const Matrix& x,
                                             const std::vector<int>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw DimensionError("prototype build: feature/label count mismatch");
  const nn::ForwardTrace trace = nn::forward(params, arch, x);
  Matrix centroids = Matrix::Zero(arch.classes, arch.feature_dim());
  std::vector<int> counts(static_cast<std::size_t>(arch.classes), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    if (c < 0 || c >= arch.classes)
      throw InputError("prototype build: label out of range");
    centroids.row(c) += trace.features().row(i);
    counts[static_cast<std::size_t>(c)] += 1;
  }
  for (int c = 0; c < arch.classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw InputError("prototype build: class " + std::to_string(c) +
                       " has no source samples");
    centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  ClassRelationGraph g = graph_from_centroids(centroids);
  if (g.present_count() != arch.classes)
    throw InputError("prototype build: degenerate class centroid");
  return g;
}

ClassRelationGraph intrinsic_from_weights(const nn::ParamSet& params,
                                          const nn::NetworkArch& arch) {
  // Classifier weight rows act as class proxies.
  const int lc = static_cast<int>(arch.hidden.size());
  const int idx = arch.with_bias ? 2 * lc : lc;
  const Matrix& w = params.arrays[static_cast<std::size_t>(idx)].value;
  if (w.rows() != arch.classes || w.cols() != arch.feature_dim())
    throw DimensionError("weights build: classifier shape mismatch");
  ClassRelationGraph g = graph_from_centroids(w);
  if (g.present_count() != arch.classes)
    throw InputError("weights build: zero-norm classifier row");
  return g;
}

TargetGraph estimate_target_graph(const Matrix& features,
                                  const std::vector<int>& pseudo_labels,
                                  int classes) {
  if (static_cast<std::size_t>(features.rows()) != pseudo_labels.size())
    throw DimensionError("target graph: feature/label count mismatch");
  TargetGraph tg;
  tg.row_class = pseudo_labels;
  tg.class_rows.assign(static_cast<std::size_t>(classes), 0);
  tg.centroid_norm.assign(static_cast<std::size_t>(classes), 0.0);

  Matrix centroids = Matrix::Zero(classes, features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int c = pseudo_labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= classes)
      throw InputError("target graph: pseudo-label out of range");
    centroids.row(c) += features.row(i);
    tg.class_rows[static_cast<std::size_t>(c)] += 1;
  }
  for (int c = 0; c < classes; ++c) {
    const int n = tg.class_rows[static_cast<std::size_t>(c)];
    if (n > 0) centroids.row(c) /= static_cast<double>(n);
    tg.centroid_norm[static_cast<std::size_t>(c)] = centroids.row(c).norm();
  }
  tg.graph = graph_from_centroids(centroids);
  // A class with rows but an all-zero centroid stays absent (zero norm).
  return tg;
}

double crp_edge_loss(const Matrix& s, const Matrix& s_target,
                     const std::vector<bool>& present) {
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  const int c = static_cast<int>(s.rows());
  for (int i = 0; i < c; ++i) {
    if (!present[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < c; ++j) {
      if (!present[static_cast<std::size_t>(j)]) continue;
      dot += s(i, j) * s_target(i, j);
      na2 += s(i, j) * s(i, j);
      nb2 += s_target(i, j) * s_target(i, j);
    }
  }
  if (na2 <= 0.0 || nb2 <= 0.0) return 0.0;
  return -dot / (std::sqrt(na2) * std::sqrt(nb2));
}

CrpResult crp_loss(const ClassRelationGraph& intrinsic,
                   const ClassRelationGraph& target) {
  CrpResult res;
  const int c = intrinsic.classes();
  if (target.classes() != c)
    throw DimensionError("crp_loss: class count mismatch");
  res.dvertices = Matrix::Zero(c, target.vertices.cols());

  std::vector<bool> both(static_cast<std::size_t>(c), false);
  int shared = 0;
  for (int i = 0; i < c; ++i) {
    both[static_cast<std::size_t>(i)] = intrinsic.present[static_cast<std::size_t>(i)] &&
                                        target.present[static_cast<std::size_t>(i)];
    shared += both[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  if (shared < 2) return res;  // loss 0, zero gradient

  const Matrix s = intrinsic.edges();
  const Matrix st = target.edges();

  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (int i = 0; i < c; ++i) {
    if (!both[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < c; ++j) {
      if (!both[static_cast<std::size_t>(j)]) continue;
      dot += s(i, j) * st(i, j);
      na2 += s(i, j) * s(i, j);
      nb2 += st(i, j) * st(i, j);
    }
  }
  const double na = std::sqrt(na2);
  const double nb = std::sqrt(nb2);
  res.loss = -dot / (na * nb);
  res.active = true;

  // dL/dS~_ij over the shared pairs, then through S~_ij = v_i . v_j.
  Matrix dst = Matrix::Zero(c, c);
  for (int i = 0; i < c; ++i) {
    if (!both[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < c; ++j) {
      if (!both[static_cast<std::size_t>(j)]) continue;
      dst(i, j) = -s(i, j) / (na * nb) + dot * st(i, j) / (na * nb * nb2);
    }
  }
  for (int i = 0; i < c; ++i) {
    if (!both[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < c; ++j) {
      if (!both[static_cast<std::size_t>(j)]) continue;
      // Both (i,j) and (j,i) contributions land on vertex i.
      res.dvertices.row(i) += (dst(i, j) + dst(j, i)) * target.vertices.row(j);
    }
  }
  return res;
}

Matrix crp_feature_grad(const CrpResult& crp, const TargetGraph& target) {
  const Eigen::Index n = static_cast<Eigen::Index>(target.row_class.size());
  const Eigen::Index h = target.graph.vertices.cols();
  Matrix grad = Matrix::Zero(n, h);
  if (!crp.active) return grad;

  const int c = target.graph.classes();
  Matrix dcentroid = Matrix::Zero(c, h);
  for (int k = 0; k < c; ++k) {
    if (!target.graph.present[static_cast<std::size_t>(k)]) continue;
    const double r = target.centroid_norm[static_cast<std::size_t>(k)];
    if (r <= kZeroNorm) continue;
    // d(u/|u|)/du applied to the vertex gradient: (g - (v.g) v) / |u|.
    const Eigen::RowVectorXd v = target.graph.vertices.row(k);
    const Eigen::RowVectorXd g = crp.dvertices.row(k);
    dcentroid.row(k) = (g - v.dot(g) * v) / r;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = target.row_class[static_cast<std::size_t>(i)];
    const int rows = target.class_rows[static_cast<std::size_t>(k)];
    if (rows == 0 || !target.graph.present[static_cast<std::size_t>(k)]) continue;
    grad.row(i) = dcentroid.row(k) / static_cast<double>(rows);
  }
  return grad;
}

}  // namespace ctta::relation
