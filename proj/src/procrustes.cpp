#include "lfa/procrustes.hpp"

#include "lfa/kernels.hpp"

#include <cmath>

namespace lfa {

BetaParam::BetaParam(double beta) : beta_(beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw Error("InvalidBeta", "beta must lie in [0, 1], got " + std::to_string(beta));
    }
}

LinearMap least_squares_map(const Matrix& source, const Matrix& target) {
    require_shape(source.rows() == target.rows() && source.cols() == target.cols(),
                  "least squares source is " + std::to_string(source.rows()) + "x" + std::to_string(source.cols()) +
                      ", target is " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
    return {pseudo_inverse(source) * target, MapKind::least_squares};
}

LinearMap orthogonal_procrustes(const Matrix& x, const Matrix& target) {
    require_shape(x.rows() == target.rows() && x.cols() == target.cols(),
                  "procrustes inputs must have identical shapes");
    const Matrix cross = kernels::matmul_at_b(x, target);
    if (cross.norm() < 1e-12) {
        throw Error("DegenerateCross", "x^T target vanishes; the orthogonal solution is not unique");
    }
    const Svd f = svd(cross);
    return {f.u * f.v.transpose(), MapKind::orthogonal};
}

LinearMap orthogonal_procrustes(const FeatureMatrix& x, const Matrix& target) {
    return orthogonal_procrustes(x.data(), target);
}

Matrix identity_regularizer_grad(const Matrix& w, BetaParam beta) {
    require_shape(w.rows() == w.cols(), "map must be square");
    return beta.value() * (w - Matrix::Identity(w.rows(), w.cols()));
}

LinearMap beta_procrustes(const LinearMap& w_op, BetaParam beta) {
    if (w_op.kind != MapKind::orthogonal) {
        throw Error("InvalidMapKind", "beta-Procrustes expects an orthogonal map, got " +
                                          std::string(to_string(w_op.kind)));
    }
    return {w_op.data - identity_regularizer_grad(w_op.data, beta), MapKind::beta};
}

}  // namespace lfa
