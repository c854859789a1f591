// Refinement objectives and their hand-derived gradients with respect to W.
//
// Every loss is evaluated on mapped embeddings z_i = x_i * W against the
// prototype rows y_j. Neighbour sets are mined from the current z and are held
// constant under differentiation, so the gradients are subgradients of the
// piecewise-smooth objective.
#pragma once

#include "lfa/core.hpp"

#include <string_view>
#include <vector>

namespace lfa {

enum class LossKind { arerank, contrastive, triplet, csls };

std::string_view to_string(LossKind kind);
/// Throws UnsupportedVariant for unknown names.
LossKind parse_loss_kind(std::string_view name);

struct LossParams {
    int k = 3;                      // mined neighbours (ARerank, triplet, CSLS)
    double s = 4.0;                 // adaptive margin divisor
    double temperature = 0.05;      // contrastive and CSLS softmax temperature
    double triplet_margin = 0.25;   // fixed triplet margin
};

struct LossValue {
    double loss = 0.0;
    Matrix grad;  // d x d
};

/// (1 - y_gt . y_other) / s
double adaptive_margin(const PrototypeMatrix& y, Index gt_class, Index other_class, double s);

/// The min(k, C - 1) incorrect classes closest (l2) to `xw`, ascending by
/// distance with ties broken by class index.
std::vector<Index> nearest_prototypes(const RowVector& xw, const PrototypeMatrix& y, Index gt_class, int k);

/// Same selection from a precomputed row of distances to every prototype.
std::vector<Index> nearest_incorrect(const double* distances, Index classes, Index gt_class, int k);

/// Mean over samples of (1/k) * sum_j max(d_ii - d_ij + m_ij, 0).
double arerank_loss(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y,
                    int k, double s);
Matrix arerank_grad(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y,
                    int k, double s);

/// Loss and gradient for any variant. ARerank goes through the same code as
/// arerank_loss/arerank_grad.
///
/// Baseline formulations:
///  - contrastive: cross-entropy of softmax(cos(z_i, y_j) / T) against the label
///  - triplet: ARerank's structure with the fixed margin `triplet_margin`
///  - csls: cross-entropy of softmax((2 cos(z_i, y_j) - r_j) / T), where r_j is
///    the mean cosine between y_j and its k nearest mapped samples in the batch;
///    r_j is differentiated with its neighbour set held fixed
LossValue evaluate_loss(LossKind kind, const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                        const PrototypeMatrix& y, const LossParams& params);

/// Dispatches the three baseline variants; throws UnsupportedVariant for arerank.
LossValue baseline_loss(LossKind kind, const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                        const PrototypeMatrix& y, const LossParams& params);

}  // namespace lfa
