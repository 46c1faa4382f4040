#pragma once

#include <string>
#include <vector>

#include "ctta/net.hpp"

namespace ctta::relation {

using nn::Matrix;

// Complete graph over classes: vertices are unit-norm class centroids in
// feature space, edges their pairwise cosine similarities. Classes without a
// usable centroid are marked absent.
struct ClassRelationGraph {
  Matrix vertices;            // C x h, unit rows where present
  std::vector<bool> present;  // per class

  int classes() const { return static_cast<int>(vertices.rows()); }
  int present_count() const;
  Matrix edges() const;  // C x C cosine matrix, zero where either end absent
};

enum class IntrinsicSource { kPrototypes, kWeights };

const char* intrinsic_source_name(IntrinsicSource s);
IntrinsicSource intrinsic_source_from_name(const std::string& name);

// Normalizes rows into vertices; zero-norm rows become absent classes.
ClassRelationGraph graph_from_centroids(const Matrix& centroids);

// Source-side intrinsic graph from per-class mean features of labeled data.
// Every class must be covered.
ClassRelationGraph intrinsic_from_prototypes(const nn::ParamSet& params,
                                             const nn::NetworkArch& arch,
                                             const Matrix& x,
                                             const std::vector<int>& y);

// Source-side intrinsic graph from the classifier weight rows.
ClassRelationGraph intrinsic_from_weights(const nn::ParamSet& params,
                                          const nn::NetworkArch& arch);

// Target-side estimate plus the bookkeeping needed to push the relation-loss
// gradient back into the per-sample features it was built from.
struct TargetGraph {
  ClassRelationGraph graph;
  std::vector<int> row_class;         // pseudo-label per feature row
  std::vector<int> class_rows;        // rows per class
  std::vector<double> centroid_norm;  // ||mean feature|| per class
};

TargetGraph estimate_target_graph(const Matrix& features,
                                  const std::vector<int>& pseudo_labels,
                                  int classes);

// Relation-preservation loss between edge-weight matrices restricted to the
// classes present in both graphs: L = -<S, S~> / (|S| |S~|), with gradient
// taken only through the target side.
struct CrpResult {
  double loss = 0.0;
  Matrix dvertices;  // C x h, gradient w.r.t. target vertices (zero if inactive)
  bool active = false;
};

CrpResult crp_loss(const ClassRelationGraph& intrinsic,
                   const ClassRelationGraph& target);

// Core of the loss on raw edge matrices over an explicit pair mask; exposed
// for the algebraic property checks (scale invariance operates on edges).
double crp_edge_loss(const Matrix& s, const Matrix& s_target,
                     const std::vector<bool>& present);

// Chain rule through normalization and centroid averaging: converts the
// vertex gradient into a per-feature-row gradient (n x h).
Matrix crp_feature_grad(const CrpResult& crp, const TargetGraph& target);

}  // namespace ctta::relation
